//! Synthetic instances: small analytic fixtures and a seeded generator of
//! city-style approval elections in the `.pb` layout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::ingest::{ProjectRow, RawElection, VoteRow};
use crate::model::Instance;

/// Two voters, two unit-cap projects, each voter approves one: MNW is `(0.5, 0.5)`.
pub fn split_pair() -> Instance {
    Instance::new(vec![1.0, 1.0], 1.0, vec![vec![0], vec![1]]).expect("valid fixture")
}

/// `n` voters in two equal blocs approving projects 0 and 1; project 2 has no
/// supporters. All caps are 1, so MNW is `(0.5, 0.5, 0)`.
pub fn two_bloc(n: usize) -> Instance {
    let approvals = (0..n).map(|i| vec![usize::from(i >= n / 2)]).collect();
    Instance::new(vec![1.0; 3], 1.0, approvals).expect("valid fixture")
}

/// One voter approving all `m` projects of size `c/2` each.
pub fn single_voter(m: usize) -> Instance {
    Instance::new(vec![0.5; m], 1.0, vec![(0..m).collect()]).expect("valid fixture")
}

/// Shape of a generated city election.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CityConfig {
    pub voters: usize,
    pub projects: usize,
    /// Budget as a fraction of the total project cost.
    pub budget_share: f64,
    /// Mean ballot length.
    pub mean_approvals: f64,
    pub seed: u64,
}

impl Default for CityConfig {
    fn default() -> Self {
        Self {
            voters: 12_000,
            projects: 40,
            budget_share: 0.35,
            mean_approvals: 4.0,
            seed: 2021,
        }
    }
}

/// Generates an approval election with district structure: projects belong to
/// one of four districts or are city-wide, voters favor their own district,
/// costs are log-normal and rounded to whole currency units.
pub fn city_election(cfg: &CityConfig) -> RawElection {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let districts = 4usize;
    let cost_dist = LogNormal::new(12.0, 0.8).expect("valid log-normal");
    let popularity_dist = LogNormal::new(0.0, 0.6).expect("valid log-normal");

    let mut projects = Vec::with_capacity(cfg.projects);
    let mut district_of = Vec::with_capacity(cfg.projects);
    let mut popularity = Vec::with_capacity(cfg.projects);
    let mut total_cost = 0.0;
    for j in 0..cfg.projects {
        let draw: f64 = cost_dist.sample(&mut rng);
        let cost = (draw / 100.0).round().max(10.0) * 100.0;
        total_cost += cost;
        let district = rng.random_range(0..=districts);
        let category = ["education", "greenery", "sport", "culture", "transport"][j % 5];
        district_of.push(district);
        popularity.push(popularity_dist.sample(&mut rng));
        let id = (j + 1).to_string();
        let area = if district == districts {
            "city".to_string()
        } else {
            format!("district-{}", district + 1)
        };
        projects.push(ProjectRow {
            id: id.clone(),
            cost,
            fields: vec![
                id,
                format!("{cost}"),
                format!("Project {}", j + 1),
                category.into(),
                area,
            ],
        });
    }
    let budget = (total_cost * cfg.budget_share / 1000.0).round() * 1000.0;

    let mut votes = Vec::with_capacity(cfg.voters);
    let mut weights = vec![0.0; cfg.projects];
    for i in 0..cfg.voters {
        let home = rng.random_range(0..districts);
        for (j, w) in weights.iter_mut().enumerate() {
            let locality = if district_of[j] == home {
                4.0
            } else if district_of[j] == districts {
                2.0
            } else {
                0.3
            };
            *w = popularity[j] * locality;
        }
        // Ballot length 1 + Poisson-like tail via repeated coin flips.
        let extra_p = (cfg.mean_approvals - 1.0) / cfg.mean_approvals;
        let mut len = 1;
        while len < cfg.projects && rng.random::<f64>() < extra_p {
            len += 1;
        }
        let mut chosen = Vec::with_capacity(len);
        for _ in 0..len {
            let total: f64 = weights.iter().sum();
            let mut r = rng.random::<f64>() * total;
            let mut pick = cfg.projects - 1;
            for (j, &w) in weights.iter().enumerate() {
                if r < w {
                    pick = j;
                    break;
                }
                r -= w;
            }
            chosen.push(pick);
            weights[pick] = 0.0;
        }
        chosen.sort_unstable();
        let ballot: Vec<String> = chosen.iter().map(|j| (j + 1).to_string()).collect();
        let age = rng.random_range(16..90).to_string();
        let vote = ballot.join(",");
        votes.push(VoteRow {
            voter_id: (i + 1).to_string(),
            approvals: ballot,
            fields: vec![(i + 1).to_string(), age, vote],
        });
    }

    RawElection {
        meta: vec![
            ("description".into(), "Synthetic city-wide participatory budget".into()),
            ("country".into(), "Nowhere".into()),
            ("unit".into(), "Synthetic City".into()),
            ("num_projects".into(), cfg.projects.to_string()),
            ("num_votes".into(), cfg.voters.to_string()),
            ("budget".into(), format!("{budget}")),
            ("vote_type".into(), "approval".into()),
            ("rule".into(), "greedy".into()),
        ],
        budget,
        project_columns: ["project_id", "cost", "name", "category", "area"]
            .map(String::from)
            .to_vec(),
        projects,
        vote_columns: ["voter_id", "age", "vote"].map(String::from).to_vec(),
        votes,
        warnings: Vec::new(),
    }
}
