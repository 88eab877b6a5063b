//! Command implementations. Every command writes its reports into the output
//! directory and returns whether all checks passed.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hyperbary::extension::{
    circumcenter_extension, inverse_consistency, lipschitz_audit, main_inequality_audit, mu_x_p, p_extension,
    ExtensionContext,
};
use hyperbary::geometry::dist;
use hyperbary::measure::{grid_atoms, uniform_boundary_grid, AnyMeasure};
use hyperbary::moebius::BoundaryMap;
use hyperbary::solver::{flow_limit_experiment, minimize, p_limit_experiment, LimitTable};
use hyperbary::{sample, Error, Lorentz, ObjectiveSpec, SpacePoint, TangentMeasure};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::checks::{self, pt, CaseFailure};
use crate::config::{Command, RunConfig};
use crate::report::{self, Suite};

/// A JSON input that failed to parse.
#[derive(Debug)]
pub struct Malformed {
    pub path: PathBuf,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl std::fmt::Display for Malformed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "malformed JSON in {} at line {}, column {}: {}",
            self.path.display(),
            self.line,
            self.column,
            self.message
        )
    }
}

impl std::error::Error for Malformed {}

/// Parses a JSON file, reporting syntax and schema errors with position.
pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        Malformed {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
        .into()
    })
}

/// Everything a command needs besides its configuration.
pub struct Run {
    pub config: RunConfig,
    pub command: Command,
    pub out: PathBuf,
    pub hash: String,
}

impl Run {
    pub fn new(config: RunConfig, command: Command, out: PathBuf) -> anyhow::Result<Self> {
        config.validate()?;
        let mut canon = config.clone();
        canon.command = Some(command);
        canon.out = None;
        let hash = report::config_hash(&canon);
        Ok(Run {
            config,
            command,
            out,
            hash,
        })
    }

    fn write(&self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.out.join(name);
        report::write_atomic(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        self.write(name, &report::to_json(value))
    }

    fn measure(&self) -> anyhow::Result<AnyMeasure> {
        let path = self
            .config
            .inputs
            .measure
            .as_ref()
            .context("this command needs inputs.measure")?;
        let m: AnyMeasure = load_json(path)?;
        if m.dim() != self.config.model.dim {
            bail!("measure has dimension {}, model has {}", m.dim(), self.config.model.dim);
        }
        Ok(m)
    }

    fn tangent_measure(&self) -> anyhow::Result<TangentMeasure> {
        Ok(self.measure()?.into_tangent()?)
    }

    fn map(&self) -> anyhow::Result<Option<BoundaryMap>> {
        match &self.config.inputs.map {
            Some(path) => {
                let f: BoundaryMap = load_json(path)?;
                if f.dim() != self.config.model.dim {
                    bail!("map has dimension {}, model has {}", f.dim(), self.config.model.dim);
                }
                Ok(Some(f))
            }
            None => Ok(None),
        }
    }

    fn context(&self, f: BoundaryMap) -> anyhow::Result<ExtensionContext> {
        let o = SpacePoint::origin(self.config.model.dim);
        Ok(ExtensionContext::new(
            f,
            uniform_boundary_grid(grid_atoms(self.config.grid_n, self.config.model.dim), &o)?,
            self.config.model,
            self.config.solver.clone(),
        )?)
    }

    fn failure(&self, suite: &str, case: usize, input: Value, err: impl ToString) -> CaseFailure {
        CaseFailure {
            suite: format!("{}:{suite}", self.command),
            case,
            input,
            message: err.to_string(),
        }
    }

    /// Dumps a failed case next to the reports.
    pub fn dump_failure(&self, f: &CaseFailure) -> anyhow::Result<PathBuf> {
        self.write_json(
            "failure.json",
            &json!({
                "config_hash": self.hash,
                "command": self.command.to_string(),
                "suite": f.suite,
                "case": f.case,
                "input": f.input,
                "message": f.message,
            }),
        )
    }

    pub fn execute(&self) -> anyhow::Result<bool> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        match self.command {
            Command::Barycenter => self.barycenter(self.config.p.0, "barycenter.json"),
            Command::Circumcenter => self.barycenter(f64::INFINITY, "circumcenter.json"),
            Command::Extend => self.extend(),
            Command::ConvergeP => self.converge_p(),
            Command::ConvergeFlow => self.converge_flow(),
            Command::Audit => self.audit(),
            Command::Verify => self.verify(),
        }
    }

    fn barycenter(&self, p: f64, file: &str) -> anyhow::Result<bool> {
        let spec = match self.measure()? {
            AnyMeasure::Space(mu) => ObjectiveSpec::cosh(mu, p)?,
            AnyMeasure::Tangent(nu) => ObjectiveSpec::busemann(nu, p)?,
            AnyMeasure::Boundary(_) => bail!("{} needs a space or tangent measure", self.command),
        };
        let res = minimize(&spec, &self.config.solver);
        if !res.converged {
            let input = json!({"measure": self.config.inputs.measure, "p": crate::config::P(p)});
            let err = Error::NotConverged {
                iterations: res.iterations,
                grad_norm: res.grad_norm,
            };
            return Err(self.failure(spec.mode(), 0, input, err).into());
        }
        self.write_json(
            file,
            &json!({
                "config_hash": self.hash,
                "mode": spec.mode(),
                "p": crate::config::P(p),
                "point": pt(&res.minimizer),
                "poincare": res.minimizer.to_poincare(),
                "value": res.value,
                "grad_norm": res.grad_norm,
                "iterations": res.iterations,
                "converged": res.converged,
                "proper": spec.is_proper(),
            }),
        )?;
        Ok(true)
    }

    fn extend(&self) -> anyhow::Result<bool> {
        let f = self.map()?.context("extend needs inputs.map")?;
        let path = self
            .config
            .inputs
            .points
            .as_ref()
            .context("extend needs inputs.points")?;
        let points = load_json::<AnyMeasure>(path)?.into_space()?;
        let ctx = self.context(f)?;
        let p = self.config.p.0;
        let images: Vec<_> = points
            .atoms()
            .par_iter()
            .map(|x| {
                if p.is_infinite() {
                    circumcenter_extension(&ctx, x)
                } else {
                    p_extension(&ctx, x, p)
                }
            })
            .collect();
        let n = self.config.model.dim;
        let mut header = vec!["index".to_string()];
        header.extend((0..=n).map(|i| format!("x_{i}")));
        header.extend((0..=n).map(|i| format!("y_{i}")));
        header.push("distance".into());
        let mut rows = Vec::new();
        let mut max_move: f64 = 0.0;
        for (i, (x, y)) in points.atoms().iter().zip(images).enumerate() {
            let y = match y {
                Ok(y) => y,
                Err(e @ Error::NotConverged { .. }) => {
                    return Err(self
                        .failure("extend", i, json!({"x": pt(x), "p": self.config.p}), e)
                        .into())
                }
                Err(e) => return Err(e.into()),
            };
            let d = dist(x, &y);
            max_move = max_move.max(d);
            let mut row = vec![i as f64];
            row.extend(x.coords().iter());
            row.extend(y.coords().iter());
            row.push(d);
            rows.push(row);
        }
        self.write("extend.csv", &report::csv(&header, &rows))?;
        self.write_json(
            "extend.json",
            &json!({"config_hash": self.hash, "points": rows.len(), "p": self.config.p, "max_displacement": max_move}),
        )?;
        Ok(true)
    }

    fn limit_csv(&self, param: &str, table: &LimitTable) -> String {
        let n = self.config.model.dim;
        let mut header = vec![param.to_string()];
        header.extend((0..=n).map(|i| format!("coord_{i}")));
        header.extend(["distance", "grad_norm", "iterations"].map(String::from));
        let rows: Vec<Vec<f64>> = table
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![r.param];
                row.extend(r.point.coords().iter());
                row.extend([r.distance, r.grad_norm, r.iterations as f64]);
                row
            })
            .collect();
        report::csv(&header, &rows)
    }

    fn limit_failure(&self, e: hyperbary::Error) -> anyhow::Error {
        match e {
            e @ Error::NotConverged { .. } => self
                .failure(
                    "limit",
                    0,
                    json!({"measure": self.config.inputs.measure, "p": self.config.p}),
                    e,
                )
                .into(),
            e => e.into(),
        }
    }

    fn converge_p(&self) -> anyhow::Result<bool> {
        let nu = self.tangent_measure()?;
        let table =
            p_limit_experiment(&nu, &self.config.p_schedule, &self.config.solver).map_err(|e| self.limit_failure(e))?;
        self.write("converge_p.csv", &self.limit_csv("p", &table))?;
        self.write_json(
            "converge_p.json",
            &json!({"config_hash": self.hash, "limit": pt(&table.limit), "t0": table.t0, "rows": table.rows.len()}),
        )?;
        Ok(true)
    }

    fn converge_flow(&self) -> anyhow::Result<bool> {
        let p = self.config.p.0;
        if p.is_infinite() {
            bail!("converge-flow needs a finite p");
        }
        let nu = self.tangent_measure()?;
        let table = flow_limit_experiment(&nu, p, &self.config.t_schedule, &self.config.solver)
            .map_err(|e| self.limit_failure(e))?;
        self.write("converge_flow.csv", &self.limit_csv("t", &table))?;
        self.write_json(
            "converge_flow.json",
            &json!({"config_hash": self.hash, "limit": pt(&table.limit), "t0": table.t0, "rows": table.rows.len()}),
        )?;
        Ok(true)
    }

    fn write_suite(&self, s: &Suite) -> anyhow::Result<PathBuf> {
        #[derive(Serialize)]
        struct File<'a> {
            config_hash: &'a str,
            #[serde(flatten)]
            suite: &'a Suite,
        }
        self.write_json(
            &format!("audit_{}.json", s.audit),
            &File {
                config_hash: &self.hash,
                suite: s,
            },
        )
    }

    fn audit(&self) -> anyhow::Result<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let dim = self.config.model.dim;
        let f = match self.map()? {
            Some(f) => f,
            None => BoundaryMap::Lorentz(Lorentz::random(&mut rng, dim, 1.5)),
        };
        let ctx = match self.context(f.clone()) {
            Ok(c) => c,
            Err(e) => {
                let rejected = matches!(e.downcast_ref::<Error>(), Some(Error::NotMoebius { .. }));
                if !rejected {
                    return Err(e);
                }
                let s = Suite::failed("moebius_gate", e.to_string());
                self.write_suite(&s)?;
                return Ok(false);
            }
        };
        let inverse = match f.inverse() {
            Ok(g) => Some(self.context(g)?),
            Err(_) => None,
        };
        let pairs: Vec<(SpacePoint, SpacePoint)> = (0..self.config.pairs)
            .map(|_| {
                (
                    sample::point_in_ball(&mut rng, dim, 3.0),
                    sample::point_in_ball(&mut rng, dim, 3.0),
                )
            })
            .collect();
        let p = self.config.p.0;
        if p.is_infinite() {
            bail!("audit needs a finite p for the main inequality and balance audits");
        }
        let scale = self.config.tolerance_scale;
        let results: Vec<_> = pairs
            .par_iter()
            .map(|pair| -> hyperbary::Result<_> {
                let main = main_inequality_audit(&ctx, std::slice::from_ref(pair), p)?.remove(0);
                let lip = lipschitz_audit(&ctx, std::slice::from_ref(pair))?;
                let inv = match &inverse {
                    Some(ci) => Some(inverse_consistency(&ctx, ci, std::slice::from_ref(&pair.0))?),
                    None => None,
                };
                let (_, bal) = mu_x_p(&ctx, &pair.0, p)?;
                Ok((main, lip, inv, bal.residual))
            })
            .collect();
        let mut main_rows = Vec::new();
        let mut lip_rows = Vec::new();
        let mut iso_rows = Vec::new();
        let mut inv_rows = Vec::new();
        let mut bal_rows = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            let (main, lip, inv, bal) = match r {
                Ok(v) => v,
                Err(e @ Error::NotConverged { .. }) => {
                    let input = json!({"x": pt(&pairs[i].0), "y": pt(&pairs[i].1), "p": self.config.p});
                    return Err(self.failure("audit", i, input, e).into());
                }
                Err(e) => return Err(e.into()),
            };
            let base = json!({"pair": i, "x": pt(&pairs[i].0), "y": pt(&pairs[i].1)});
            let with = |extra: Value| {
                let mut row = base.clone();
                row.as_object_mut()
                    .expect("object")
                    .extend(extra.as_object().expect("object").clone());
                row
            };
            main_rows.push((
                main.violation,
                with(json!({"distance": main.distance, "upper": [main.upper.0, main.upper.1], "lower": [main.lower.0, main.lower.1], "violation": main.violation})),
            ));
            let lr = &lip.rows[0];
            lip_rows.push((
                (lr.ratio - 1.0).max(0.0),
                with(json!({"ratio": lr.ratio, "distance": lr.distance, "image_distance": lr.image_distance})),
            ));
            iso_rows.push((lip.max_isometry_error, with(json!({"error": lip.max_isometry_error}))));
            if let Some(e) = inv {
                inv_rows.push((e, with(json!({"error": e}))));
            }
            bal_rows.push((bal, with(json!({"residual": bal}))));
        }
        let mut suites = vec![
            Suite::new("main_inequality", 1e-9 * scale, main_rows),
            Suite::new("lipschitz", 1e-8 * scale, lip_rows),
            Suite::new("isometry", 1e-6 * scale, iso_rows),
            Suite::new("balance", 1e-8 * scale, bal_rows),
        ];
        if inverse.is_some() {
            suites.push(Suite::new("inverse", 1e-6 * scale, inv_rows));
        }
        for s in &suites {
            self.write_suite(s)?;
        }
        Ok(suites.iter().all(|s| s.pass))
    }

    fn verify(&self) -> anyhow::Result<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let s = self.config.tolerance_scale;
        let g = self.config.grid_n;
        let mut suites = Vec::new();
        suites.extend(checks::closed_forms(&mut rng, 200, s)?);
        suites.extend(checks::convexity(&mut rng, 100, s)?);
        suites.extend(checks::oracle_equivalence(&mut rng, 12, 1e-2, s)?);
        suites.extend(checks::flow_limit(&mut rng, 4, s)?);
        suites.extend(checks::p_limit(&mut rng, 4, s)?);
        suites.extend(checks::naturality(&mut rng, 3, 3, g, s)?);
        suites.extend(checks::balance_certificates(&mut rng, 6, g, s)?);
        suites.extend(checks::derivative_identity(&mut rng, 6, g, s)?);
        suites.extend(checks::audits(&mut rng, 2, 5, g, 4.0, s)?);
        suites.extend(checks::moebius_gate(&mut rng, 12, s)?);
        let pass = suites.iter().all(|s| s.pass);
        let summary: Vec<Value> = suites
            .iter()
            .map(|s| json!({"audit": s.audit, "pairs": s.pairs, "max_violation": s.max_violation, "tolerance": s.tolerance, "pass": s.pass}))
            .collect();
        self.write_json(
            "verify.json",
            &json!({"config_hash": self.hash, "seed": self.config.seed, "pass": pass, "suites": summary}),
        )?;
        self.write_json("verify_rows.json", &json!({"config_hash": self.hash, "suites": suites}))?;
        Ok(pass)
    }
}
