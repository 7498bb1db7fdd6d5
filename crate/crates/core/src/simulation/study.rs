use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, generate_data, scenario, Metrics, Scenario};
use crate::error::{Error, Result};
use crate::io::format_float;
use crate::selection::{
    select_model, GridSpec, PenaltyFamily, DEFAULT_ALPHA_GRID, DEFAULT_L1_GRID,
};
use crate::solvers::{Problem, SolverSettings};
use crate::tree::make_binary_tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "R1", alias = "r1")]
    R1,
    #[serde(rename = "R", alias = "r")]
    R,
    #[serde(rename = "lasso", alias = "Lasso")]
    Lasso,
    #[serde(rename = "EN", alias = "en")]
    ElasticNet,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::R1 => "R1",
            Method::R => "R",
            Method::Lasso => "lasso",
            Method::ElasticNet => "EN",
        }
    }

    pub fn family(self) -> PenaltyFamily {
        match self {
            Method::R1 => PenaltyFamily::total_effect(),
            Method::R => PenaltyFamily::Tree {
                alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            },
            Method::Lasso => PenaltyFamily::Lasso,
            Method::ElasticNet => PenaltyFamily::ElasticNet {
                l1_grid: DEFAULT_L1_GRID.to_vec(),
            },
        }
    }
}

/// A scenario given inline in a study config: a unit- or constant-weight
/// binary tree and a full-length `beta_star`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserScenario {
    pub name: String,
    pub levels: usize,
    #[serde(default = "one")]
    pub weight: f64,
    pub beta_star: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    1e-8
}

fn default_points() -> usize {
    GridSpec::default().points
}

fn default_ratio() -> f64 {
    GridSpec::default().min_ratio
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationConfig {
    pub scenarios: Vec<String>,
    pub methods: Vec<Method>,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub omega: Option<Vec<f64>>,
    /// Threshold for calling an estimated entry active.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_points")]
    pub grid_points: usize,
    #[serde(default = "default_ratio")]
    pub min_ratio: f64,
    #[serde(default)]
    pub custom_scenarios: Vec<UserScenario>,
}

impl ReplicationConfig {
    pub fn new(scenarios: &[&str], methods: &[Method], n: usize, reps: usize, seed: u64) -> Self {
        ReplicationConfig {
            scenarios: scenarios.iter().map(|s| s.to_string()).collect(),
            methods: methods.to_vec(),
            n,
            reps,
            seed,
            sigma: 1.0,
            omega: None,
            tol: default_tol(),
            grid_points: default_points(),
            min_ratio: default_ratio(),
            custom_scenarios: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        if self.reps < 1 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if self.scenarios.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidConfig(
                "scenarios and methods must be nonempty".into(),
            ));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::NonpositiveSigma(self.sigma));
        }
        if !(self.tol >= 0.0)
            || self.grid_points < 2
            || !(self.min_ratio > 0.0 && self.min_ratio < 1.0)
        {
            return Err(Error::InvalidConfig(
                "tol, grid_points or min_ratio out of range".into(),
            ));
        }
        Ok(())
    }

    fn resolve(&self, name: &str) -> Result<Scenario> {
        let Some(user) = self.custom_scenarios.iter().find(|s| s.name == name) else {
            return scenario(name);
        };
        let tree = make_binary_tree(user.levels, user.weight)?;
        if user.beta_star.len() != tree.node_count() {
            return Err(Error::InvalidConfig(format!(
                "scenario {name}: beta_star has {} entries, tree has {} nodes",
                user.beta_star.len(),
                tree.node_count()
            )));
        }
        Ok(Scenario {
            name: name.to_string(),
            beta_star: DVector::from_vec(user.beta_star.clone()),
            tree,
            description: "user-defined".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub scenario: String,
    pub method: Method,
    /// Replications that completed.
    pub replications: usize,
    pub failures: usize,
    /// Completed replications whose selected fit was not certified.
    pub unconverged: usize,
    pub beta_sensitivity: Option<f64>,
    pub beta_specificity: Option<f64>,
    pub beta_mse: Option<f64>,
    pub gamma_sensitivity: Option<f64>,
    pub gamma_specificity: Option<f64>,
    pub gamma_mse: Option<f64>,
    pub mean_cp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
}

pub const REPORT_HEADER: [&str; 13] = [
    "scenario",
    "method",
    "replications",
    "failures",
    "unconverged",
    "beta_sensitivity",
    "beta_specificity",
    "beta_mse",
    "gamma_sensitivity",
    "gamma_specificity",
    "gamma_mse",
    "mean_cp",
    "n",
];

impl StudyReport {
    pub fn row(&self, scenario: &str, method: Method) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.method == method)
    }

    /// CSV with one row per scenario and method; undefined averages are
    /// written as `NA`.
    pub fn write_csv<W: Write>(&self, n: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_HEADER)?;
        let cell = |v: Option<f64>| v.map(format_float).unwrap_or_else(|| "NA".into());
        for r in &self.rows {
            w.write_record([
                r.scenario.clone(),
                r.method.as_str().to_string(),
                r.replications.to_string(),
                r.failures.to_string(),
                r.unconverged.to_string(),
                cell(r.beta_sensitivity),
                cell(r.beta_specificity),
                cell(r.beta_mse),
                cell(r.gamma_sensitivity),
                cell(r.gamma_specificity),
                cell(r.gamma_mse),
                cell(r.mean_cp),
                n.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Outcome {
    beta: Metrics,
    gamma: Metrics,
    cp: f64,
    converged: bool,
}

fn replicate(
    sc: &Scenario,
    config: &ReplicationConfig,
    rep: usize,
    settings: &SolverSettings,
) -> Result<Vec<Result<Outcome>>> {
    let seed = config.seed ^ rep as u64;
    let (x, y) = generate_data(
        &sc.tree,
        &sc.beta_star,
        config.n,
        config.sigma,
        config.omega.as_deref(),
        seed,
    )?;
    let problem = Problem::new(x, y)?;
    let d = sc.tree.influence();
    let gamma_star = d.total_effects(&sc.beta_star);
    let grid = GridSpec {
        points: config.grid_points,
        min_ratio: config.min_ratio,
    };
    let sigma2 = config.sigma * config.sigma;
    Ok(config
        .methods
        .iter()
        .map(|m| {
            let t = select_model(&problem, Some(&d), &m.family(), &grid, sigma2, settings)?;
            Ok(Outcome {
                beta: evaluate(&t.fit.beta_hat, &sc.beta_star, config.tol)?,
                gamma: evaluate(&t.gamma_hat, &gamma_star, config.tol)?,
                cp: t.best_cp(),
                converged: t.fit.converged,
            })
        })
        .collect())
}

#[derive(Default)]
struct Mean {
    sum: f64,
    count: usize,
}

impl Mean {
    fn add(&mut self, v: Option<f64>) {
        if let Some(v) = v {
            self.sum += v;
            self.count += 1;
        }
    }

    fn get(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Runs every scenario and method for `config.reps` replications. All
/// methods of one replication see the same data, drawn with seed
/// `config.seed ^ rep`. Replications run in parallel; results are reduced
/// in replication order so the report does not depend on scheduling.
pub fn run_study(config: &ReplicationConfig, settings: &SolverSettings) -> Result<StudyReport> {
    config.validate()?;
    let scenarios: Vec<Scenario> = config
        .scenarios
        .iter()
        .map(|s| config.resolve(s))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for sc in &scenarios {
        let outcomes: Vec<Result<Vec<Result<Outcome>>>> = (0..config.reps)
            .into_par_iter()
            .map(|rep| replicate(sc, config, rep, settings))
            .collect();
        for (k, &method) in config.methods.iter().enumerate() {
            let mut means: [Mean; 7] = Default::default();
            let (mut done, mut failures, mut unconverged) = (0, 0, 0);
            for rep in &outcomes {
                match rep.as_ref().map(|v| &v[k]) {
                    Ok(Ok(o)) => {
                        done += 1;
                        unconverged += usize::from(!o.converged);
                        for (m, v) in means.iter_mut().zip([
                            o.beta.sensitivity,
                            o.beta.specificity,
                            Some(o.beta.mse),
                            o.gamma.sensitivity,
                            o.gamma.specificity,
                            Some(o.gamma.mse),
                            Some(o.cp),
                        ]) {
                            m.add(v);
                        }
                    }
                    _ => failures += 1,
                }
            }
            rows.push(StudyRow {
                scenario: sc.name.clone(),
                method,
                replications: done,
                failures,
                unconverged,
                beta_sensitivity: means[0].get(),
                beta_specificity: means[1].get(),
                beta_mse: means[2].get(),
                gamma_sensitivity: means[3].get(),
                gamma_specificity: means[4].get(),
                gamma_mse: means[5].get(),
                mean_cp: means[6].get(),
            });
        }
    }
    if rows.iter().all(|r| r.replications == 0) {
        return Err(Error::AllReplicationsFailed);
    }
    Ok(StudyReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_from_json() {
        let c: ReplicationConfig = serde_json::from_str(
            r#"{"scenarios":["p7-a"],"methods":["R1","lasso","EN","R"],"n":50,"reps":2,"seed":7}"#,
        )
        .unwrap();
        assert_eq!(c.sigma, 1.0);
        assert_eq!(
            c.methods,
            vec![Method::R1, Method::Lasso, Method::ElasticNet, Method::R]
        );
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = ReplicationConfig::new(&["p7-a"], &[Method::R1], 1, 1, 0);
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        c.n = 10;
        c.reps = 0;
        assert!(c.validate().is_err());
        c.reps = 1;
        c.scenarios = vec!["nope".into()];
        assert!(matches!(
            run_study(&c, &SolverSettings::default()),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn small_study_is_reproducible() {
        let c = ReplicationConfig::new(&["p7-d"], &[Method::R1, Method::Lasso], 30, 2, 9);
        let a = run_study(&c, &SolverSettings::default()).unwrap();
        let b = run_study(&c, &SolverSettings::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2);
        for r in &a.rows {
            assert_eq!(r.replications, 2);
            for v in [
                r.beta_sensitivity,
                r.beta_specificity,
                r.gamma_sensitivity,
                r.gamma_specificity,
            ] {
                let v = v.unwrap();
                assert!((0.0..=1.0).contains(&v));
            }
        }
        let mut buf = Vec::new();
        a.write_csv(30, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }

    #[test]
    fn user_scenario_overrides_registry() {
        let mut c = ReplicationConfig::new(&["mine"], &[Method::Lasso], 20, 1, 3);
        c.custom_scenarios.push(UserScenario {
            name: "mine".into(),
            levels: 2,
            weight: 1.0,
            beta_star: vec![0.0, 2.0, 0.0],
        });
        let r = run_study(&c, &SolverSettings::default()).unwrap();
        assert_eq!(r.rows[0].replications, 1);
    }
}
