//! Participatory-budgeting election files (`.pb`) and the cost-utility
//! transform to approval instances.
//!
//! A file has three `;`-separated sections:
//!
//! ```text
//! META
//! key;value
//! budget;1000
//! PROJECTS
//! project_id;cost;name
//! 1;400;Park
//! VOTES
//! voter_id;vote
//! 17;1,2
//! ```

use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, ParseError, ParseErrorKind};
use crate::model::{Instance, Labels};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectRow {
    pub id: String,
    pub cost: f64,
    /// Every column of the row, in header order.
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRow {
    pub voter_id: String,
    /// Approved project ids that exist in the project table, in ballot order.
    pub approvals: Vec<String>,
    pub fields: Vec<String>,
}

/// Non-fatal findings while parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParseWarning {
    UnknownProject {
        line: usize,
        voter: String,
        project: String,
    },
    CountMismatch {
        key: String,
        declared: String,
        found: usize,
    },
}

/// Parsed election, lossless for every column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawElection {
    /// META rows in file order.
    pub meta: Vec<(String, String)>,
    pub budget: f64,
    pub project_columns: Vec<String>,
    pub projects: Vec<ProjectRow>,
    pub vote_columns: Vec<String>,
    pub votes: Vec<VoteRow>,
    pub warnings: Vec<ParseWarning>,
}

impl RawElection {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Unknown-project warnings only.
    pub fn dropped_approvals(&self) -> usize {
        self.warnings
            .iter()
            .filter(|w| matches!(w, ParseWarning::UnknownProject { .. }))
            .count()
    }

    /// Seeded uniform subsample of `voters` ballots, kept in file order.
    /// Returns a copy when `voters` is at least the current count.
    pub fn subsample(&self, voters: usize, seed: u64) -> RawElection {
        let mut out = self.clone();
        if voters >= self.votes.len() {
            return out;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = rand::seq::index::sample(&mut rng, self.votes.len(), voters).into_vec();
        keep.sort_unstable();
        out.votes = keep.into_iter().map(|i| self.votes[i].clone()).collect();
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Section {
    Meta,
    Projects,
    Votes,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Meta => "META",
            Section::Projects => "PROJECTS",
            Section::Votes => "VOTES",
        }
    }

    fn header_prefix(self) -> &'static str {
        match self {
            Section::Meta => "key",
            Section::Projects => "project_id",
            Section::Votes => "voter_id",
        }
    }
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn split_row(line: &str, lineno: usize) -> Result<Vec<String>, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b';')
        .has_headers(false)
        .flexible(true)
        .from_reader(line.as_bytes());
    let mut record = csv::StringRecord::new();
    match reader.read_record(&mut record) {
        Ok(_) => Ok(record.iter().map(|f| f.trim().to_string()).collect()),
        Err(e) => Err(err(lineno, ParseErrorKind::Row(e.to_string()))),
    }
}

fn parse_positive(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite() && *v > 0.0)
}

struct Table {
    header_line: usize,
    columns: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

/// Parses a `.pb` file.
pub fn parse_pabulib(text: &str) -> Result<RawElection, ParseError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut tables: HashMap<Section, Table> = HashMap::new();
    let mut current: Option<Section> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let marker = match line.trim().to_ascii_uppercase().as_str() {
            "META" => Some(Section::Meta),
            "PROJECTS" => Some(Section::Projects),
            "VOTES" => Some(Section::Votes),
            _ => None,
        };
        if let Some(section) = marker {
            if tables.contains_key(&section) {
                return Err(err(lineno, ParseErrorKind::DuplicateSection(section.name())));
            }
            tables.insert(
                section,
                Table {
                    header_line: 0,
                    columns: Vec::new(),
                    rows: Vec::new(),
                },
            );
            current = Some(section);
            continue;
        }
        let section = current.ok_or_else(|| err(lineno, ParseErrorKind::Orphan))?;
        let table = tables.get_mut(&section).expect("section registered on its marker");
        let fields = split_row(line, lineno)?;
        if table.header_line == 0 {
            if fields.first().map(String::as_str) != Some(section.header_prefix()) {
                return Err(err(
                    lineno,
                    ParseErrorKind::BadHeader {
                        section: section.name(),
                        expected: section.header_prefix(),
                    },
                ));
            }
            table.header_line = lineno;
            table.columns = fields;
        } else {
            table.rows.push((lineno, fields));
        }
    }

    let last_line = text.lines().count();
    let mut take = |section: Section| -> Result<Table, ParseError> {
        let table = tables
            .remove(&section)
            .ok_or_else(|| err(last_line, ParseErrorKind::MissingSection(section.name())))?;
        if table.header_line == 0 {
            return Err(err(last_line, ParseErrorKind::MissingHeader(section.name())));
        }
        Ok(table)
    };
    let meta_table = take(Section::Meta)?;
    let project_table = take(Section::Projects)?;
    let vote_table = take(Section::Votes)?;

    let mut warnings = Vec::new();

    // META
    let mut meta = Vec::with_capacity(meta_table.rows.len());
    let mut budget = None;
    for (lineno, fields) in &meta_table.rows {
        let key = fields.first().cloned().unwrap_or_default();
        let value = fields[1.min(fields.len())..].join(";");
        match key.as_str() {
            "budget" => {
                budget =
                    Some(parse_positive(&value).ok_or_else(|| err(*lineno, ParseErrorKind::BadBudget(value.clone())))?);
            }
            "vote_type" if !value.eq_ignore_ascii_case("approval") => {
                return Err(err(*lineno, ParseErrorKind::UnsupportedVoteType(value)));
            }
            _ => {}
        }
        meta.push((key, value));
    }
    let budget = budget.ok_or_else(|| err(meta_table.header_line, ParseErrorKind::MissingBudget))?;

    // PROJECTS
    let cost_col = project_table
        .columns
        .iter()
        .position(|c| c == "cost")
        .ok_or_else(|| err(project_table.header_line, ParseErrorKind::MissingColumn("cost")))?;
    let mut known: HashSet<String> = HashSet::new();
    let mut projects = Vec::with_capacity(project_table.rows.len());
    for (lineno, mut fields) in project_table.rows {
        normalize_width(&mut fields, project_table.columns.len(), lineno)?;
        let id = fields[0].clone();
        let cost = parse_positive(&fields[cost_col])
            .ok_or_else(|| err(lineno, ParseErrorKind::BadCost(fields[cost_col].clone())))?;
        if !known.insert(id.clone()) {
            return Err(err(lineno, ParseErrorKind::DuplicateProject(id)));
        }
        projects.push(ProjectRow { id, cost, fields });
    }

    // VOTES
    let vote_col = vote_table
        .columns
        .iter()
        .position(|c| c == "vote")
        .ok_or_else(|| err(vote_table.header_line, ParseErrorKind::MissingColumn("vote")))?;
    let mut voters_seen: HashSet<String> = HashSet::new();
    let mut votes = Vec::with_capacity(vote_table.rows.len());
    for (lineno, mut fields) in vote_table.rows {
        normalize_width(&mut fields, vote_table.columns.len(), lineno)?;
        let voter_id = fields[0].clone();
        if !voters_seen.insert(voter_id.clone()) {
            return Err(err(lineno, ParseErrorKind::DuplicateVoter(voter_id)));
        }
        let mut approvals = Vec::new();
        for id in fields[vote_col].split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if known.contains(id) {
                approvals.push(id.to_string());
            } else {
                warnings.push(ParseWarning::UnknownProject {
                    line: lineno,
                    voter: voter_id.clone(),
                    project: id.to_string(),
                });
            }
        }
        votes.push(VoteRow {
            voter_id,
            approvals,
            fields,
        });
    }

    for (key, found) in [("num_projects", projects.len()), ("num_votes", votes.len())] {
        if let Some((_, declared)) = meta.iter().find(|(k, _)| k == key) {
            if declared.trim().parse::<usize>().ok() != Some(found) {
                warnings.push(ParseWarning::CountMismatch {
                    key: key.to_string(),
                    declared: declared.clone(),
                    found,
                });
            }
        }
    }
    if !warnings.is_empty() {
        log::warn!("{} warning(s) while parsing election", warnings.len());
    }

    Ok(RawElection {
        meta,
        budget,
        project_columns: project_table.columns,
        projects,
        vote_columns: vote_table.columns,
        votes,
        warnings,
    })
}

fn normalize_width(fields: &mut Vec<String>, width: usize, lineno: usize) -> Result<(), ParseError> {
    if fields.len() > width {
        return Err(err(
            lineno,
            ParseErrorKind::FieldCount {
                expected: width,
                got: fields.len(),
            },
        ));
    }
    fields.resize(width, String::new());
    Ok(())
}

/// Serializes back to the `.pb` layout. Parsing the output reproduces `raw`.
pub fn write_pabulib(raw: &RawElection) -> String {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(b';')
        .flexible(true)
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    let marker = |w: &mut csv::Writer<Vec<u8>>, name: &str| {
        w.write_record([name]).expect("in-memory write");
    };
    marker(&mut writer, "META");
    writer.write_record(["key", "value"]).expect("in-memory write");
    for (k, v) in &raw.meta {
        writer.write_record([k, v]).expect("in-memory write");
    }
    marker(&mut writer, "PROJECTS");
    writer.write_record(&raw.project_columns).expect("in-memory write");
    for p in &raw.projects {
        writer.write_record(&p.fields).expect("in-memory write");
    }
    marker(&mut writer, "VOTES");
    writer.write_record(&raw.vote_columns).expect("in-memory write");
    for v in &raw.votes {
        writer.write_record(&v.fields).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("input was UTF-8")
}

/// Binary approval utilities: `s_j` = project cost, `c` = budget, file order fixes indices.
pub fn cost_utility(raw: &RawElection) -> Result<Instance, ModelError> {
    let index: HashMap<&str, usize> = raw
        .projects
        .iter()
        .enumerate()
        .map(|(j, p)| (p.id.as_str(), j))
        .collect();
    let approvals = raw
        .votes
        .iter()
        .map(|v| {
            v.approvals
                .iter()
                .filter_map(|id| index.get(id.as_str()).copied())
                .collect()
        })
        .collect();
    let sizes = raw.projects.iter().map(|p| p.cost).collect();
    let labels = Labels {
        projects: raw.projects.iter().map(|p| p.id.clone()).collect(),
        voters: raw.votes.iter().map(|v| v.voter_id.clone()).collect(),
    };
    Ok(Instance::new(sizes, raw.budget, approvals)?.with_labels(labels))
}
