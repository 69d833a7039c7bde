//! Config-driven workflows: each command reads a [`Config`], writes its
//! data files into an output directory and returns a JSON summary.

mod config;
mod figures;
mod files;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::{Config, KEYS};
pub use files::{
    profile_table, read_rows, series_table, snapshot_table, write_record, write_rows, NumTable,
};

use crate::criticality::{
    attractor_comparison, attractor_sign_test, bisect_critical, regime_scan, BisectOptions,
    CriticalSearchResult, Pulse, RunSettings, SearchStatus, SignBase, SignVerdict, SsOptions,
    Thresholds, Verdict,
};
use crate::error::{Error, Result};
use crate::evolver::{
    convergence_order, evolve, GridSpec, OuterStencil, RadialGrid, SchemeOptions, SnapshotPolicy,
};
use crate::initial_data::{Extras, Family, FamilyKind, FamilySpec};
use crate::self_similar::{lambda_spectrum, solve_ab, ShootingOptions, SpectrumOptions};
use crate::static_solutions::{omega_spectrum, solve_static, OmegaOptions, StaticOptions};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evolve,
    Bisect,
    AbSolve,
    LambdaSpec,
    StaticSolve,
    OmegaSpec,
    SignTest,
    RegimeScan,
    SsCompare,
    Convergence,
    Figure,
}

impl Command {
    pub const ALL: [Command; 11] = [
        Command::Evolve,
        Command::Bisect,
        Command::AbSolve,
        Command::LambdaSpec,
        Command::StaticSolve,
        Command::OmegaSpec,
        Command::SignTest,
        Command::RegimeScan,
        Command::SsCompare,
        Command::Convergence,
        Command::Figure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Bisect => "bisect",
            Command::AbSolve => "ab-solve",
            Command::LambdaSpec => "lambda-spec",
            Command::StaticSolve => "static-solve",
            Command::OmegaSpec => "omega-spec",
            Command::SignTest => "sign-test",
            Command::RegimeScan => "regime-scan",
            Command::SsCompare => "ss-compare",
            Command::Convergence => "convergence",
            Command::Figure => "figure",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

/// Process exit status for a finished (or failed) command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitKind {
    Success,
    ConfigError,
    NumericalFailure,
    /// Completed, but every verdict it produced was ambiguous.
    Ambiguous,
    IoError,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Success => 0,
            ExitKind::ConfigError => 2,
            ExitKind::NumericalFailure => 3,
            ExitKind::Ambiguous => 4,
            ExitKind::IoError => 5,
        }
    }

    pub fn of_error(e: &Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Parse { .. }
            | Error::MissingDependency { .. }
            | Error::InvalidParameter(_)
            | Error::InvalidBracket(_) => ExitKind::ConfigError,
            Error::Io { .. } => ExitKind::IoError,
            _ => ExitKind::NumericalFailure,
        }
    }
}

/// Machine-readable result written as `<id>_summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: Command,
    pub run_id: String,
    pub exit: ExitKind,
    pub results: Value,
    /// Data files written, relative to the output directory.
    pub files: Vec<String>,
    /// Every configuration key with the value used.
    pub config: std::collections::BTreeMap<String, String>,
}

impl Summary {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Output directory: `WAVEMAP_OUT` if set, else `--out`, else `./out`.
pub fn output_dir(flag: Option<&Path>) -> PathBuf {
    match std::env::var_os("WAVEMAP_OUT") {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => flag.map_or_else(|| PathBuf::from("out"), Path::to_path_buf),
    }
}

pub(crate) struct Ctx<'a> {
    pub cfg: &'a Config,
    pub dir: &'a Path,
    pub id: String,
    pub files: Vec<String>,
}

impl Ctx<'_> {
    pub fn path(&mut self, suffix: &str) -> PathBuf {
        let name = format!("{}_{suffix}", self.id);
        self.files.push(name.clone());
        self.dir.join(name)
    }

    pub fn record(&mut self, tag: &str, record: &crate::evolver::EvolutionRecord) -> Result<()> {
        let id = format!("{}{tag}", self.id);
        for p in write_record(self.dir, &id, record)? {
            self.files
                .push(p.file_name().unwrap().to_string_lossy().into_owned());
        }
        Ok(())
    }
}

pub(crate) fn family_spec(cfg: &Config) -> Result<FamilySpec> {
    Ok(FamilySpec {
        kind: FamilyKind::parse(cfg.raw("family.kind"))?,
        amplitude: cfg.get("family.amplitude")?,
        r0: cfg.get("family.r0")?,
        width: cfg.get("family.width")?,
        extras: Extras {
            a: cfg.get("family.a")?,
            n: cfg.get("family.n")?,
            t0: cfg.get("family.t0")?,
            r_ramp: cfg.opt("family.r_ramp")?,
        },
    })
}

pub(crate) fn run_settings(cfg: &Config) -> Result<RunSettings> {
    let outer_stencil = match cfg.raw("numerics.outer_stencil") {
        "second_order" => OuterStencil::SecondOrder,
        "first_order" => OuterStencil::FirstOrder,
        other => {
            return Err(Error::Config(format!(
                "numerics.outer_stencil must be second_order or first_order, got `{other}`"
            )))
        }
    };
    let times: Vec<f64> = cfg.list("evolve.snapshot_times")?;
    Ok(RunSettings {
        grid: GridSpec {
            r_max: cfg.get("grid.r_max")?,
            h_in: cfg.get("grid.h_in")?,
            h_out: cfg.get("grid.h_out")?,
            width: cfg.get("grid.width")?,
        },
        scheme: SchemeOptions {
            cfl: cfg.get("numerics.cfl")?,
            iter_tol: cfg.get("numerics.iter_tol")?,
            max_iters: cfg.get("numerics.max_iters")?,
            outer_stencil,
        },
        m: cfg.get("model.m")?,
        duration: cfg.get("evolve.duration")?,
        samples: cfg.get("evolve.samples")?,
        snapshots: if times.is_empty() {
            SnapshotPolicy::Count(cfg.get("evolve.snapshots")?)
        } else {
            SnapshotPolicy::Times(times)
        },
        probe_radii: cfg.list("evolve.probe_radii")?,
        thresholds: Thresholds {
            theta_blow: cfg.get("thresholds.theta_blow")?,
            k: cfg.get("thresholds.k")?,
            f_disp: cfg.get("thresholds.f_disp")?,
            sustained: cfg.get("thresholds.sustained")?,
            r_in: cfg.opt("thresholds.r_in")?,
            promote_chi_range: cfg.get("thresholds.promote_chi_range")?,
        },
    })
}

pub(crate) fn shooting(cfg: &Config) -> Result<ShootingOptions> {
    Ok(ShootingOptions {
        z_ser: cfg.get("ab.z_ser")?,
        match_point: cfg.get("ab.match_point")?,
        res_tol: cfg.get("ab.res_tol")?,
        ..ShootingOptions::default()
    })
}

pub(crate) fn ss_options(cfg: &Config) -> Result<SsOptions> {
    Ok(SsOptions {
        z_window: (cfg.get("ss.z_lo")?, cfg.get("ss.z_hi")?),
        first_gap: cfg.get("ss.first_gap")?,
        ratio: cfg.get("ss.ratio")?,
        frames: cfg.get("ss.frames")?,
    })
}

pub(crate) fn pulse(cfg: &Config) -> Result<Pulse> {
    Ok(Pulse {
        amplitude: cfg.get("pulse.amplitude")?,
        r0: cfg.get("pulse.r0")?,
        width: cfg.get("pulse.width")?,
    })
}

pub(crate) fn sign_base(cfg: &Config) -> Result<SignBase> {
    match cfg.raw("sign.base") {
        "static" => Ok(SignBase::Static {
            a: cfg.get("sign.a")?,
        }),
        "self_similar" => Ok(SignBase::SelfSimilar {
            n: cfg.get("sign.n")?,
            t0: cfg.get("sign.t0")?,
        }),
        other => Err(Error::Config(format!(
            "sign.base must be static or self_similar, got `{other}`"
        ))),
    }
}

/// Bisection result of an earlier `bisect` run in the same directory.
pub(crate) fn upstream_search(dir: &Path, source: &str) -> Result<(CriticalSearchResult, Config)> {
    let path = dir.join(format!("{source}_summary.json"));
    if !path.exists() {
        return Err(Error::MissingDependency {
            what: path.display().to_string(),
            command: "bisect".into(),
        });
    }
    let summary = Summary::read(&path)?;
    let search: CriticalSearchResult = serde_json::from_value(summary.results["search"].clone())
        .map_err(|e| Error::Parse {
            path: path.clone(),
            line: 0,
            message: e.to_string(),
        })?;
    let mut cfg = Config::default();
    for (k, v) in &summary.config {
        cfg.set(k, v)?;
    }
    Ok((search, cfg))
}

/// Run one command and write its files and summary into `dir`.
pub fn run(command: Command, cfg: &Config, dir: &Path, jobs: usize) -> Result<Summary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let id = match cfg.raw("run.id") {
        "" => command.name().to_string(),
        s => s.to_string(),
    };
    let mut ctx = Ctx {
        cfg,
        dir,
        id,
        files: Vec::new(),
    };
    let mut work = || dispatch(command, &mut ctx);
    let (results, exit) = if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?
            .install(work)?
    } else {
        work()?
    };
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command,
        run_id: ctx.id.clone(),
        exit,
        results,
        files: ctx.files.clone(),
        config: cfg
            .entries()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    };
    let path = dir.join(format!("{}_summary.json", ctx.id));
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    let echo = dir.join(format!("{}_config.txt", ctx.id));
    std::fs::write(&echo, cfg.echo()).map_err(|e| Error::io(&echo, e))?;
    Ok(summary)
}

fn verdict_exit(all_ambiguous: bool) -> ExitKind {
    if all_ambiguous {
        ExitKind::Ambiguous
    } else {
        ExitKind::Success
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

fn dispatch(command: Command, ctx: &mut Ctx) -> Result<(Value, ExitKind)> {
    let cfg = ctx.cfg;
    match command {
        Command::Evolve => {
            let family = Family::new(family_spec(cfg)?)?;
            let settings = run_settings(cfg)?;
            let run = settings.run(&family, family.spec.amplitude)?;
            ctx.record("", &run.record)?;
            let fit = crate::criticality::collapse_time(&run.record).ok();
            Ok((
                json!({
                    "verdict": run.label.verdict,
                    "evidence": run.label.evidence,
                    "collapse_time": fit,
                    "dt": run.record.dt,
                    "points": run.record.radii.len(),
                    "notes": run.notes,
                }),
                verdict_exit(run.label.verdict == Verdict::Ambiguous),
            ))
        }
        Command::Bisect => {
            let family = Family::new(family_spec(cfg)?)?;
            let settings = run_settings(cfg)?;
            let opts = BisectOptions {
                tol: cfg.get("bisect.tol")?,
                budget: cfg.get("bisect.budget")?,
                fanout: rayon::current_num_threads().max(1),
            };
            let search = bisect_critical(
                &family,
                &settings,
                cfg.get("bisect.lo")?,
                cfg.get("bisect.hi")?,
                &opts,
            )?;
            let p = ctx.path("history.csv");
            write_rows(&p, &search.history)?;
            let exit = match search.status {
                SearchStatus::Ambiguous => ExitKind::Ambiguous,
                _ => ExitKind::Success,
            };
            Ok((
                json!({
                    "p_star": search.p_star,
                    "bracket": search.bracket,
                    "relative_width": search.relative_width(),
                    "status": search.status,
                    "t_star": search.t_star,
                    "search": search,
                }),
                exit,
            ))
        }
        Command::AbSolve => {
            let n = cfg.get("ab.n")?;
            let profile = solve_ab(n, &shooting(cfg)?)?;
            profile_table("z", &profile.samples()).write(&ctx.path("profile.csv"))?;
            Ok((
                json!({
                    "n": profile.n,
                    "b": profile.b,
                    "c": profile.c,
                    "chi_infinity": profile.chi_infinity(),
                    "crossings": profile.count_crossings()?,
                    "residual_norm": profile.residual_norm,
                    "match_mismatch": profile.match_mismatch,
                }),
                ExitKind::Success,
            ))
        }
        Command::LambdaSpec => {
            let n = cfg.get("ab.n")?;
            let profile = solve_ab(n, &shooting(cfg)?)?;
            let limit: usize = cfg.get("lambda.count_limit")?;
            let opts = SpectrumOptions {
                lambda_min: cfg.get("lambda.min")?,
                lambda_max: cfg.get("lambda.max")?,
                step: cfg.get("lambda.step")?,
                count_limit: if limit == 0 { usize::MAX } else { limit },
                ..SpectrumOptions::default()
            };
            let modes = lambda_spectrum(&profile, &opts)?;
            let mut list = Vec::new();
            for (k, m) in modes.iter().enumerate() {
                let mut t = NumTable::new(["z", "u", "du"]);
                for (z, u, du) in m.samples() {
                    t.push(vec![z, u, du]);
                }
                t.write(&ctx.path(&format!("mode_{k}.csv")))?;
                list.push(json!({
                    "lambda": m.lambda,
                    "class": m.classification,
                    "match_residual": m.match_residual,
                }));
            }
            Ok((
                json!({ "n": n, "b": profile.b, "eigenvalues": list }),
                ExitKind::Success,
            ))
        }
        Command::StaticSolve => {
            let profile = solve_static(
                cfg.get("static.a")?,
                cfg.get("static.r_ode")?,
                &StaticOptions::default(),
            )?;
            profile_table("r", &profile.samples()).write(&ctx.path("profile.csv"))?;
            Ok((
                json!({
                    "a": profile.a,
                    "r_ode": profile.r_ode,
                    "residual_norm": profile.residual_norm,
                }),
                ExitKind::Success,
            ))
        }
        Command::OmegaSpec => {
            let profile = solve_static(
                cfg.get("static.a")?,
                cfg.get("static.r_ode")?,
                &StaticOptions::default(),
            )?;
            let opts = OmegaOptions {
                omega_sq_min: cfg.get("omega.min")?,
                omega_sq_max: cfg.get("omega.max")?,
                points_per_decade: cfg.get("omega.points_per_decade")?,
                ..OmegaOptions::default()
            };
            let modes = omega_spectrum(&profile, &opts)?;
            for (k, m) in modes.iter().enumerate() {
                let mut t = NumTable::new(["r", "u", "du"]);
                for (r, u, du) in m.samples() {
                    t.push(vec![r, u, du]);
                }
                t.write(&ctx.path(&format!("mode_{k}.csv")))?;
            }
            let list: Vec<_> = modes.iter().map(|m| m.summary()).collect();
            Ok((
                json!({ "a": profile.a, "r_ode": profile.r_ode, "modes": list }),
                ExitKind::Success,
            ))
        }
        Command::SignTest => {
            let test = attractor_sign_test(sign_base(cfg)?, &pulse(cfg)?, &run_settings(cfg)?)?;
            let exit = verdict_exit(test.verdict == SignVerdict::Indeterminate);
            Ok((to_value(&test), exit))
        }
        Command::RegimeScan => {
            let eps: Vec<f64> = cfg.list("scan.eps")?;
            if eps.is_empty() {
                return Err(Error::Config("scan.eps is empty".into()));
            }
            let rows = regime_scan(&eps, cfg.get("scan.delta")?, &run_settings(cfg)?)?;
            let table: Vec<_> = rows.iter().map(|(r, _)| r.clone()).collect();
            write_rows(&ctx.path("scan.csv"), &table)?;
            for (row, run) in &rows {
                ctx.record(&format!("_eps_{}", row.epsilon), &run.record)?;
            }
            let all_ambiguous = table.iter().all(|r| r.verdict == Verdict::Ambiguous);
            Ok((
                json!({ "delta": cfg.get::<f64>("scan.delta")?, "rows": table }),
                verdict_exit(all_ambiguous),
            ))
        }
        Command::SsCompare => {
            let (search, upstream) = upstream_search(ctx.dir, cfg.raw("ss.source"))?;
            if search.status != SearchStatus::Converged {
                return Err(Error::InsufficientData(format!(
                    "upstream bisection ended with status {:?}",
                    search.status
                )));
            }
            let family = Family::new(search.family.clone())?;
            let settings = run_settings(&upstream)?;
            let profile = solve_ab(cfg.get("ss.n")?, &shooting(cfg)?)?;
            let (run, cmp) =
                attractor_comparison(&family, &settings, &search, &profile, &ss_options(cfg)?)?;
            write_rows(&ctx.path("frames.csv"), &cmp.frames)?;
            ctx.record("_run", &run.record)?;
            Ok((
                json!({
                    "amplitude": run.amplitude,
                    "t_star": cmp.t_star,
                    "z_window": cmp.z_window,
                    "frames": cmp.frames,
                    "max_deviation_after_first": cmp.frames.iter().skip(1)
                        .map(|f| f.deviation).fold(0.0, f64::max),
                }),
                ExitKind::Success,
            ))
        }
        Command::Convergence => {
            let family = Family::new(family_spec(cfg)?)?;
            let settings = run_settings(cfg)?;
            let levels: usize = cfg.get("convergence.levels")?;
            if levels != 3 {
                return Err(Error::Config(
                    "convergence.levels must be 3 (one Richardson triplet)".into(),
                ));
            }
            let dr: f64 = cfg.get("convergence.dr")?;
            let t: f64 = cfg.get("convergence.t")?;
            let grids = (0..levels)
                .map(|k| RadialGrid::uniform(settings.grid.r_max, dr / f64::from(1 << k)))
                .collect::<Result<Vec<_>>>()?;
            let report = convergence_order(&grids, |g| {
                let data = family.initial_data(family.spec.amplitude, g)?;
                let model = settings.model(g.clone())?.with_background(data.background);
                let t0 = data.state.t;
                let spec = crate::evolver::MonitorSpec {
                    snapshots: SnapshotPolicy::None,
                    blow_up: None,
                    ..crate::evolver::MonitorSpec::default()
                };
                let rec = evolve(&model, data.state, t0 + t, &spec)?;
                Ok(rec.final_state.expect("evolve keeps the final state").chi)
            })?;
            Ok((to_value(&report), ExitKind::Success))
        }
        Command::Figure => figures::emit_figure_data(ctx),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(cfg: &mut Config) {
        for kv in [
            "grid.r_max=10",
            "grid.h_in=0.05",
            "grid.h_out=0.05",
            "evolve.duration=12",
            "family.r0=2",
            "evolve.snapshots=3",
            "family.amplitude=0.01",
        ] {
            cfg.set_pair(kv).unwrap();
        }
    }

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(Command::parse(c.name()).unwrap(), c);
            let v = serde_json::to_value(c).unwrap();
            assert_eq!(v, json!(c.name()));
        }
        assert!(Command::parse("nope").is_err());
    }

    #[test]
    fn evolve_outputs_round_trip_and_are_deterministic() {
        let mut cfg = Config::default();
        small(&mut cfg);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let s = run(Command::Evolve, &cfg, a.path(), 1).unwrap();
        run(Command::Evolve, &cfg, b.path(), 1).unwrap();
        assert_eq!(s.exit, ExitKind::Success);
        assert!(s.files.contains(&"evolve_series.csv".to_string()));
        for f in &s.files {
            let x = std::fs::read(a.path().join(f)).unwrap();
            assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
            let t = NumTable::read(&a.path().join(f)).unwrap();
            assert!(!t.rows.is_empty());
        }
        let back = Summary::read(&a.path().join("evolve_summary.json")).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.config.len(), KEYS.len());
        let echo = std::fs::read_to_string(a.path().join("evolve_config.txt")).unwrap();
        assert_eq!(Config::parse(&echo, Path::new("echo")).unwrap(), cfg);
    }

    #[test]
    fn errors_map_to_distinct_exit_codes() {
        let codes = [
            ExitKind::of_error(&Error::Config("x".into())),
            ExitKind::of_error(&Error::BranchNotFound { n: 1, b_max: 1.0 }),
            ExitKind::Ambiguous,
            ExitKind::of_error(&Error::io("p", std::io::Error::other("x"))),
        ];
        let mut seen: Vec<i32> = codes.iter().map(|c| c.code()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 4);
        assert!(!seen.contains(&0));
    }

    #[test]
    fn missing_upstream_names_the_command() {
        let dir = tempfile::tempdir().unwrap();
        let err = run(Command::SsCompare, &Config::default(), dir.path(), 1).unwrap_err();
        assert!(matches!(err, Error::MissingDependency { .. }));
        assert!(err.to_string().contains("wavemap bisect"));
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut cfg = Config::default();
        cfg.set_pair("numerics.outer_stencil=third").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = run(Command::Evolve, &cfg, dir.path(), 1).unwrap_err();
        assert_eq!(ExitKind::of_error(&err), ExitKind::ConfigError);
    }
}
