//! Report documents and their serialization.
//!
//! Every float is written with 17 significant digits (`{:.16e}`), which
//! round-trips `f64` exactly. Non-finite values become `null`.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use ppga_core::metrics::MetricsReport;
use ppga_core::ppga::IterationRecord;
use ppga_core::PrivacyLedger;

use crate::config::DpEcho;

/// Bumped on any change to the report layout.
pub const REPORT_VERSION: &str = "1.0";

#[derive(Debug, Clone, Serialize)]
pub struct InstanceEcho {
    pub voters: usize,
    pub projects: usize,
    pub ballot_classes: usize,
    pub excluded_voters: usize,
    pub dropped_approvals: usize,
}

/// Everything that determines the report contents. The thread count is left
/// out because it does not.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub tool_version: &'static str,
    pub input: String,
    pub sample: Option<usize>,
    pub seed: u64,
    pub rho: f64,
    pub upsilon: f64,
    pub xi: Option<f64>,
    pub policy: ppga_core::FailurePolicy,
    pub dp: Option<DpEcho>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub adaptive_rho: Option<bool>,
    pub runs: Option<usize>,
    pub instance: InstanceEcho,
}

/// Output of `solve` and `baseline`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub command: &'static str,
    pub allocation: Vec<f64>,
    pub metrics: MetricsReport,
    pub ledger: Option<PrivacyLedger>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
    pub config_echo: ConfigEcho,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoreSummary {
    pub allocation: Vec<f64>,
    pub metrics: MetricsReport,
    pub iterations: usize,
    pub converged: bool,
}

/// One private run measured against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRow {
    pub seed: u64,
    pub sw: f64,
    pub sw_ratio: f64,
    pub ps_min_times_n: Option<f64>,
    pub ps_avg: Option<f64>,
    pub sd_per_m: Option<f64>,
    pub core_violation: Option<f64>,
    pub allocation: Vec<f64>,
}

/// Column-wise summary over the seeds. A column is `null` when any run left
/// it undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub sw_ratio: Option<f64>,
    pub ps_min_times_n: Option<f64>,
    pub ps_avg: Option<f64>,
    pub sd_per_m: Option<f64>,
    pub core_violation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub runs: usize,
    pub mean: Summary,
    pub min: Summary,
    pub median: Summary,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub version: &'static str,
    pub command: &'static str,
    pub core: CoreSummary,
    pub ledger: Option<PrivacyLedger>,
    pub runs: Vec<SeedRow>,
    pub aggregate: Option<Aggregate>,
    pub config_echo: ConfigEcho,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsOnlyReport {
    pub version: &'static str,
    pub command: &'static str,
    pub metrics: MetricsReport,
    pub config_echo: ConfigEcho,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn minimum(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn column(rows: &[SeedRow], get: impl Fn(&SeedRow) -> Option<f64>) -> Option<Vec<f64>> {
    rows.iter().map(get).collect()
}

fn summarize(rows: &[SeedRow], stat: fn(&[f64]) -> f64) -> Summary {
    let apply = |get: &dyn Fn(&SeedRow) -> Option<f64>| column(rows, get).map(|c| stat(&c));
    Summary {
        sw_ratio: apply(&|r| Some(r.sw_ratio)),
        ps_min_times_n: apply(&|r| r.ps_min_times_n),
        ps_avg: apply(&|r| r.ps_avg),
        sd_per_m: apply(&|r| r.sd_per_m),
        core_violation: apply(&|r| r.core_violation),
    }
}

pub fn aggregate(rows: &[SeedRow]) -> Option<Aggregate> {
    if rows.is_empty() {
        return None;
    }
    Some(Aggregate {
        runs: rows.len(),
        mean: summarize(rows, mean),
        min: summarize(rows, minimum),
        median: summarize(rows, median),
    })
}

/// Pretty JSON with full-precision floats.
#[derive(Default)]
pub struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision::default());
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

/// `seed,sw_ppga,sw_core,sw_ratio` rows.
pub fn sw_ratio_csv(rows: &[SeedRow], core_sw: f64) -> csv::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "sw_ppga", "sw_core", "sw_ratio"])?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            format!("{:.16e}", r.sw),
            format!("{core_sw:.16e}"),
            format!("{:.16e}", r.sw_ratio),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}
