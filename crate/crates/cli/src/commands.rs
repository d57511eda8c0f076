//! The commands. Each computes an [`Outcome`] from resolved settings; the
//! shared driver prints it, writes the artifacts and the run manifest.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use ymlab::flow::{
    entropy_monotonicity_harness, gastel_eta, run, sample_times, tracking_error, Boundary, FlowState, HarnessCfg,
    SolverCfg, Trajectory,
};
use ymlab::functionals::{entropy, f_shrinker, matching_conventions, reference_lambda, xi_grid, EntropySearch};
use ymlab::{Basepoint, GastelParams};

use crate::config::{FlowBoundary, Format, Settings, Suite};
use crate::output::{conventions, sha256_hex, OutputDir, RunManifest, MANIFEST_FILE};
use crate::profile::{connection, AnyProfile, Kind};
use crate::suites::{self, CheckRow};
use crate::{exit, CliError};

/// Relative tolerance for a replayed value.
pub const REPLAY_TOL: f64 = 1e-9;

/// Relative deviation within which a convention is said to match the reference column.
pub const MATCH_TOL: f64 = 5e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Table,
    Verify,
    Flow,
    XiScan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Table => "table",
            Self::Verify => "verify",
            Self::Flow => "flow",
            Self::XiScan => "xi-scan",
        }
    }

    fn parse(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "table" => Self::Table,
            "verify" => Self::Verify,
            "flow" => Self::Flow,
            "xi-scan" => Self::XiScan,
            other => return Err(CliError::Config(format!("manifest names unknown command {other:?}"))),
        })
    }
}

/// What a command produced, before anything is written.
#[derive(Debug, Default)]
pub struct Outcome {
    pub pass: bool,
    pub stdout: String,
    pub results: Value,
    /// Tolerances in force, keyed by check id.
    pub tolerances: BTreeMap<String, f64>,
    pub seeds: Vec<u64>,
    /// Artifacts (relative path, contents).
    pub files: Vec<(String, Vec<u8>)>,
}

pub fn compute(cmd: Command, s: &Settings) -> Result<Outcome, CliError> {
    s.validate()?;
    match cmd {
        Command::Table => table(s),
        Command::Verify => verify(s),
        Command::Flow => flow(s),
        Command::XiScan => xi_scan(s),
    }
}

/// Runs a command end to end and returns the exit code.
pub fn execute(cmd: Command, s: &Settings) -> Result<i32, CliError> {
    s.validate()?;
    let start = Instant::now();
    let mut dir = s.out.as_deref().map(OutputDir::acquire).transpose()?;
    let outcome = compute(cmd, s)?;
    print!("{}", outcome.stdout);
    if let Some(dir) = dir.as_mut() {
        for (name, bytes) in &outcome.files {
            dir.write(name, bytes)?;
        }
        let mut tolerances = json!({ "tol_quad": s.tol_quad, "replay_rel": REPLAY_TOL });
        tolerances["checks"] = serde_json::to_value(&outcome.tolerances).map_err(json_err)?;
        let manifest = RunManifest {
            tool: "ymlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: cmd.name().into(),
            config: s.clone(),
            seeds: outcome.seeds.clone(),
            tolerances,
            conventions: conventions(s),
            status: if outcome.pass { "pass" } else { "fail" }.into(),
            results: outcome.results.clone(),
            wall_time_s: start.elapsed().as_secs_f64(),
            artifacts: dir.artifacts().to_vec(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(json_err)? + "\n";
        dir.write(MANIFEST_FILE, text.as_bytes())?;
        eprintln!("wrote {} artifacts and {} to {}", outcome.files.len(), MANIFEST_FILE, dir.root().display());
    }
    Ok(if outcome.pass { exit::PASS } else { exit::CHECK_FAILED })
}

/// Re-runs the command recorded in a manifest and compares every result and
/// artifact checksum.
pub fn replay(path: &Path) -> Result<i32, CliError> {
    let manifest = RunManifest::read(path)?;
    let cmd = Command::parse(&manifest.command)?;
    let mut settings = manifest.config.clone();
    settings.out = None;
    let outcome = compute(cmd, &settings)?;
    let mut cmp = Comparison::default();
    cmp.walk("results", &manifest.results, &outcome.results);
    let fresh: BTreeMap<&str, String> =
        outcome.files.iter().map(|(name, bytes)| (name.as_str(), sha256_hex(bytes))).collect();
    let mut checksums_ok = 0;
    for a in manifest.artifacts.iter().filter(|a| a.file != MANIFEST_FILE) {
        match fresh.get(a.file.as_str()) {
            Some(h) if *h == a.sha256 => checksums_ok += 1,
            Some(_) => cmp.mismatches.push(format!("artifact {} checksum differs", a.file)),
            None => cmp.mismatches.push(format!("artifact {} not produced", a.file)),
        }
    }
    let status = if outcome.pass { "pass" } else { "fail" };
    if status != manifest.status {
        cmp.mismatches.push(format!("status {status} differs from recorded {}", manifest.status));
    }
    println!(
        "replay {}: {} values compared, max relative deviation {:.3e} (tol {REPLAY_TOL:e}); {checksums_ok} artifact checksums match",
        manifest.command, cmp.values, cmp.max_rel
    );
    for m in &cmp.mismatches {
        println!("  mismatch: {m}");
    }
    Ok(if cmp.mismatches.is_empty() { exit::PASS } else { exit::CHECK_FAILED })
}

#[derive(Default)]
struct Comparison {
    values: usize,
    max_rel: f64,
    mismatches: Vec<String>,
}

impl Comparison {
    fn walk(&mut self, at: &str, old: &Value, new: &Value) {
        match (old, new) {
            (Value::Number(a), Value::Number(b)) => {
                let (a, b) = (a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN));
                self.values += 1;
                let rel = if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
                self.max_rel = self.max_rel.max(rel);
                if !(rel <= REPLAY_TOL) {
                    self.mismatches.push(format!("{at}: {a} vs {b}"));
                }
            }
            (Value::Array(a), Value::Array(b)) if a.len() == b.len() => {
                for (k, (x, y)) in a.iter().zip(b).enumerate() {
                    self.walk(&format!("{at}[{k}]"), x, y);
                }
            }
            (Value::Object(a), Value::Object(b)) if a.len() == b.len() => {
                for (k, x) in a {
                    match b.get(k) {
                        Some(y) => self.walk(&format!("{at}.{k}"), x, y),
                        None => self.mismatches.push(format!("{at}.{k} missing")),
                    }
                }
            }
            (a, b) if a == b => {}
            _ => self.mismatches.push(format!("{at}: structure differs")),
        }
    }
}

fn json_err(e: serde_json::Error) -> CliError {
    CliError::Numeric(format!("cannot serialise results: {e}"))
}

fn to_json<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(json_err)
}

fn pretty<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    Ok((serde_json::to_string_pretty(v).map_err(json_err)? + "\n").into_bytes())
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Numeric(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Numeric(format!("csv: {e}")))
}

// ---------------------------------------------------------------- table

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableLine {
    pub n: usize,
    /// A, B, C, or `reference` for the published column.
    pub convention: String,
    pub lambda: f64,
    pub error: Option<f64>,
    pub argmax_c: Option<f64>,
    pub argmax_t0: Option<f64>,
    pub reference: Option<f64>,
    pub rel_dev: Option<f64>,
}

fn table(s: &Settings) -> Result<Outcome, CliError> {
    let q = s.quadrature();
    let search = EntropySearch::default();
    let mut lines = Vec::new();
    let mut core_rows = Vec::new();
    let mut warnings = Vec::new();
    let mut gastel_dims = Vec::new();
    for &n in &s.dims {
        let conn = connection(s, n)?;
        let kind = conn.profile.kind();
        let argmax = if kind == Kind::Flat {
            Basepoint::origin()
        } else {
            let e = entropy(&conn, &search, &q)?;
            if !e.converged {
                return Err(CliError::Numeric(format!("entropy search for n = {n} did not converge")));
            }
            if e.boundary_drift {
                warnings.push(format!("n = {n}: maximiser on the edge of the search box"));
            }
            e.argmax
        };
        let reference = if kind == Kind::Gastel { reference_lambda(n) } else { None };
        if reference.is_some() {
            gastel_dims.push((n, reference));
        }
        for &conv in &s.conventions {
            let est = f_shrinker(&conn, &argmax, &q, conv)?;
            let rel_dev = reference.map(|r| (est.value - r) / r);
            lines.push(TableLine {
                n,
                convention: conv.label().into(),
                lambda: est.value,
                error: Some(est.error),
                argmax_c: Some(argmax.c),
                argmax_t0: Some(argmax.t0),
                reference,
                rel_dev,
            });
            core_rows.push(ymlab::functionals::TableRow {
                n,
                convention: conv,
                value: est.value,
                error: est.error,
                argmax,
                reference,
                rel_dev,
            });
        }
    }
    for (n, reference) in gastel_dims {
        if let Some(r) = reference {
            lines.push(TableLine {
                n,
                convention: "reference".into(),
                lambda: r,
                error: None,
                argmax_c: None,
                argmax_t0: None,
                reference: Some(r),
                rel_dev: Some(0.0),
            });
        }
    }
    let matching: Vec<&str> = matching_conventions(&core_rows, MATCH_TOL).iter().map(|c| c.label()).collect();
    let body = match s.format {
        Format::Csv => csv_bytes(&lines)?,
        Format::Json => pretty(&lines)?,
    };
    let mut stdout = String::from_utf8_lossy(&body).into_owned();
    let any_reference = lines.iter().any(|l| l.convention == "reference");
    if any_reference {
        let m = if matching.is_empty() { "none".to_string() } else { matching.join(",") };
        eprintln!("conventions matching the reference column within {MATCH_TOL}: {m}");
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if s.format == Format::Json {
        stdout.truncate(stdout.trim_end().len());
        stdout.push('\n');
    }
    let name = match s.format {
        Format::Csv => "table.csv",
        Format::Json => "table.json",
    };
    Ok(Outcome {
        pass: true,
        stdout,
        results: json!({ "rows": to_json(&lines)?, "matching_conventions": matching, "warnings": warnings }),
        tolerances: BTreeMap::from([("match_rel".to_string(), MATCH_TOL)]),
        seeds: Vec::new(),
        files: vec![(name.into(), body)],
    })
}

// ---------------------------------------------------------------- verify

fn verify(s: &Settings) -> Result<Outcome, CliError> {
    let suites = match s.suite {
        Some(one) => vec![one],
        None => vec![Suite::Identities, Suite::Eigenforms, Suite::Bianchi, Suite::Gap, Suite::Variation, Suite::Scaling],
    };
    let mut rows: Vec<CheckRow> = Vec::new();
    for suite in suites {
        rows.extend(suites::run(suite, s)?);
    }
    let pass = rows.iter().all(|r| r.pass);
    let stdout = match s.format {
        Format::Json => String::from_utf8_lossy(&pretty(&rows)?).into_owned(),
        Format::Csv => summary_table(&rows),
    };
    let tolerances = rows.iter().map(|r| (format!("{}@n{}", r.check_id, r.n), r.tolerance)).collect();
    let seeds = s.dims.iter().map(|&n| s.seed.wrapping_mul(1000).wrapping_add(n as u64)).collect();
    Ok(Outcome {
        pass,
        stdout,
        results: to_json(&rows)?,
        tolerances,
        seeds,
        files: vec![("report.json".into(), pretty(&rows)?)],
    })
}

fn summary_table(rows: &[CheckRow]) -> String {
    let w = rows.iter().map(|r| r.check_id.len()).max().unwrap_or(8).max(8);
    let mut out = format!("{:<w$}  {:>2}  {:>10}  {:>9}  result\n", "check", "n", "residual", "tolerance");
    for r in rows {
        out += &format!(
            "{:<w$}  {:>2}  {:>10.3e}  {:>9.1e}  {}\n",
            r.check_id,
            r.n,
            r.residual,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    out += &format!("{} checks, {} passed, {} failed\n", rows.len(), rows.len() - failed, failed);
    out
}

// ---------------------------------------------------------------- xi-scan

#[derive(Clone, Debug, Serialize, Deserialize)]
struct XiLine {
    n: usize,
    c: f64,
    log_t0: f64,
    xi: f64,
}

fn linspace(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..m).map(|k| a + (b - a) * k as f64 / (m - 1) as f64).collect()
}

fn xi_scan(s: &Settings) -> Result<Outcome, CliError> {
    let q = s.quadrature();
    let cs = linspace(0.0, s.xi.c_max, s.grid.0);
    let lts = linspace(s.xi.log_t0_min, s.xi.log_t0_max, s.grid.1);
    let mut lines = Vec::new();
    let mut summary = Vec::new();
    let mut pass = true;
    let mut stdout = String::new();
    for &n in &s.dims {
        let conn = connection(s, n)?;
        let grid = xi_grid(&conn, &cs, &lts, &q)?;
        let mut best = (0, 0);
        for (i, row) in grid.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                lines.push(XiLine { n, c: cs[i], log_t0: lts[j], xi: v });
                if v > grid[best.0][best.1] {
                    best = (i, j);
                }
            }
        }
        let top = grid[best.0][best.1];
        let second = grid
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().filter(move |(j, _)| (i, *j) != best).map(|(_, v)| *v))
            .fold(f64::NEG_INFINITY, f64::max);
        let origin_j = (0..lts.len()).min_by(|&a, &b| lts[a].abs().total_cmp(&lts[b].abs())).unwrap_or(0);
        let (check, ok) = match conn.profile.kind() {
            Kind::Flat => ("identically zero", grid.iter().flatten().all(|v| *v == 0.0)),
            Kind::Gastel => ("unique maximum at the grid node nearest (0, 1)", best == (0, origin_j) && top > second),
            Kind::Sampled => ("none", true),
        };
        pass &= ok;
        stdout += &format!(
            "n = {n}: max xi = {top:.12} at (c, log t0) = ({}, {}), margin to next node {:.3e}; check {check}: {}\n",
            cs[best.0],
            lts[best.1],
            top - second,
            if ok { "PASS" } else { "FAIL" }
        );
        summary.push(json!({
            "n": n, "max": top, "argmax_c": cs[best.0], "argmax_log_t0": lts[best.1],
            "margin": top - second, "check": check, "pass": ok,
        }));
    }
    let axes = json!({
        "data": "xi.csv",
        "x": { "column": "c", "label": "|x0|" },
        "y": { "column": "log_t0", "label": "log t0" },
        "z": { "column": "xi", "label": "Xi(x0, t0)" },
        "group": "n",
        "shape": [cs.len(), lts.len()],
    });
    Ok(Outcome {
        pass,
        stdout,
        results: json!({ "summary": summary, "grid": to_json(&lines)? }),
        tolerances: BTreeMap::new(),
        seeds: Vec::new(),
        files: vec![("xi.csv".into(), csv_bytes(&lines)?), ("xi_axes.json".into(), pretty(&axes)?)],
    })
}

// ---------------------------------------------------------------- flow

#[derive(Serialize)]
struct Snapshot<'a> {
    rho: &'a f64,
    eta: &'a f64,
}

fn initial_state(s: &Settings, profile: &AnyProfile, n: usize) -> Result<FlowState, CliError> {
    let f = &s.flow;
    let mut state = match profile {
        AnyProfile::Gastel(_) => {
            if !(f.t0 < 0.0) {
                return Err(CliError::Config(format!("the self-similar start needs t0 < 0, got {}", f.t0)));
            }
            FlowState::gastel(n, f.dr, f.rho_max, f.t0)?
        }
        AnyProfile::Flat => FlowState::from_fn(f.dr, f.rho_max, f.t0, |_| 0.0)?,
        AnyProfile::Sampled(p) => FlowState::from_profile(p, f.dr, f.t0)?,
    };
    for v in &mut state.eta {
        *v *= f.perturb;
    }
    Ok(state)
}

/// Both trajectories cut to their common sample times.
fn common_prefix(a: &Trajectory, b: &Trajectory) -> (Trajectory, Trajectory) {
    let m = a.states.len().min(b.states.len());
    let cut = |t: &Trajectory| Trajectory { states: t.states[..m].to_vec(), ..t.clone() };
    (cut(a), cut(b))
}

fn flow(s: &Settings) -> Result<Outcome, CliError> {
    let f = &s.flow;
    let times = sample_times(f.t0, f.t1, f.samples);
    let mut files = Vec::new();
    let mut results = Vec::new();
    let mut tolerances = BTreeMap::new();
    let mut pass = true;
    let mut stdout = String::new();
    for &n in &s.dims {
        let conn = connection(s, n)?;
        let kind = conn.profile.kind();
        if f.gastel && kind != Kind::Gastel {
            return Err(CliError::Config("gastel conflicts with flat and profile".into()));
        }
        let state = initial_state(s, &conn.profile, n)?;
        let rho_max = *state.rho.last().unwrap_or(&f.rho_max);
        let mut cfg = SolverCfg::new(n);
        cfg.cfl = f.cfl;
        cfg.blowup_threshold = f.blowup_threshold;
        cfg.boundary = match f.boundary {
            FlowBoundary::Clamp => Boundary::ClampInitial,
            FlowBoundary::Mirror => Boundary::Mirror,
            FlowBoundary::Exact => {
                if kind != Kind::Gastel || f.perturb != 1.0 {
                    return Err(CliError::Config("boundary = exact needs the unperturbed Gastel start".into()));
                }
                let p = GastelParams::new(n)?;
                Boundary::Dirichlet(Arc::new(move |t| gastel_eta(&p, rho_max, t)))
            }
        };
        cfg.validate()?;
        let traj = run(state.clone(), &cfg, &times, |_| {})?;

        let mut snap_files = Vec::new();
        let mut sup_f = Vec::new();
        for (k, st) in traj.states.iter().enumerate() {
            let rows: Vec<Snapshot> = st.rho.iter().zip(&st.eta).map(|(rho, eta)| Snapshot { rho, eta }).collect();
            let name = format!("n{n}/snap_{k:03}.csv");
            files.push((name.clone(), csv_bytes(&rows)?));
            snap_files.push(name);
            sup_f.push(st.sup_f(n));
        }

        let tracking = if f.gastel && f.perturb == 1.0 {
            let p = GastelParams::new(n)?;
            let err = traj
                .states
                .iter()
                .map(|st| tracking_error(st, rho_max / 2.0, |r, t| gastel_eta(&p, r, t)))
                .fold(0.0, f64::max);
            tolerances.insert(format!("tracking@n{n}"), f.tracking_bound);
            Some(err)
        } else {
            None
        };
        let tracking_ok = tracking.is_none_or(|e| e <= f.tracking_bound);

        let mut harness = Value::Null;
        let mut harness_ok = true;
        let mut note = None;
        if f.harness {
            let shadow_state = FlowState::from_fn(2.0 * f.dr, rho_max, state.t, |r| {
                let i = (r / f.dr).round() as usize;
                state.eta.get(i).copied().unwrap_or(0.0)
            })?;
            let shadow = run(shadow_state, &cfg, &times, |_| {})?;
            let (main, shadow) = common_prefix(&traj, &shadow);
            if main.states.len() >= 10 {
                let hcfg = HarnessCfg { with_entropy: f.entropy, ..HarnessCfg::default() };
                let rep = entropy_monotonicity_harness(&main, Some(&shadow), &hcfg)?;
                harness_ok = rep.passed();
                tolerances.insert(format!("harness_rel_slack@n{n}"), hcfg.rel_slack);
                files.push((format!("n{n}/harness.json"), pretty(&rep)?));
                harness = to_json(&rep)?;
            } else {
                note = Some(format!("harness skipped: {} common samples, needs 10", main.states.len()));
            }
        }
        pass &= tracking_ok && harness_ok;

        let index = json!({
            "n": n,
            "t": traj.times(),
            "files": snap_files,
            "sup_F": sup_f,
            "events": traj.events,
            "steps": traj.steps,
            "boundary": f.boundary,
            "midpoint_change": traj.midpoint_change,
        });
        files.push((format!("n{n}/index.json"), pretty(&index)?));

        stdout += &format!(
            "n = {n}: {} samples to t = {}, {} steps, sup|F| {:.6} -> {:.6}, change at rho_max/2 {:.3e}",
            traj.states.len(),
            traj.states.last().map_or(f.t0, |st| st.t),
            traj.steps,
            sup_f.first().copied().unwrap_or(0.0),
            sup_f.last().copied().unwrap_or(0.0),
            traj.midpoint_change,
        );
        for e in &traj.events {
            stdout += &format!("; event {e:?}");
        }
        if let Some(e) = tracking {
            stdout += &format!("; tracking error {e:.3e} (bound {:e})", f.tracking_bound);
        }
        if !harness.is_null() {
            stdout += &format!("; monotonicity {}", if harness_ok { "holds" } else { "VIOLATED" });
        }
        if let Some(m) = &note {
            stdout += &format!("; {m}");
        }
        stdout += &format!(": {}\n", if tracking_ok && harness_ok { "PASS" } else { "FAIL" });

        results.push(json!({
            "n": n,
            "t": traj.times(),
            "sup_F": sup_f,
            "events": traj.events,
            "midpoint_change": traj.midpoint_change,
            "tracking_error": tracking,
            "tracking_pass": tracking_ok,
            "harness": harness,
            "harness_pass": harness_ok,
            "note": note,
        }));
    }
    Ok(Outcome { pass, stdout, results: Value::Array(results), tolerances, seeds: Vec::new(), files })
}
