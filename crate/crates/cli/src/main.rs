use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand, ValueEnum};
use regspec::auxiliary::{schedule_params, AuxParams};
use regspec::experiment::{
    error_budget, gap_statistics, load_records, minami_check, records_path, run_campaign,
    selected_fields, wegner_check, ExperimentConfig, GraphSpec,
};
use regspec::graph::Graph;
use regspec::poisson::{bound_report, laplace_gap};

#[derive(Parser)]
#[command(name = "regspec", version, about = "Eigenvalue statistics of random Schrödinger operators on regular graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Regular,
    RegularTree,
    Cycle,
    Path,
    Complete,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph and write its edge list.
    Generate {
        #[arg(long, value_enum, default_value = "regular")]
        family: FamilyArg,
        /// Vertex count (branching factor for trees).
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        degree: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Tree depth.
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long)]
        out: PathBuf,
        /// Fail unless ball volumes obey the degree bounds.
        #[arg(long)]
        check_volume: bool,
    },
    /// Run a campaign and write its records and summary.
    Run {
        config: PathBuf,
        #[arg(long, env = "REGSPEC_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
        #[arg(long, env = "REGSPEC_WORKERS")]
        workers: Option<usize>,
    },
    /// Check the Wegner, Minami, Chen–Stein and comparison bounds on stored records.
    VerifyBounds {
        config: PathBuf,
        /// Directory holding the campaign outputs.
        #[arg(long)]
        dir: PathBuf,
    },
    /// Gap statistics and the Laplace table of stored records.
    Analyze {
        config: PathBuf,
        #[arg(long)]
        dir: PathBuf,
    },
    /// Print the schedule parameters and error budget.
    Schedule {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        mu_s: f64,
        #[arg(long)]
        a: f64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate {
            family,
            n,
            degree,
            seed,
            depth,
            out,
            check_volume,
        } => {
            let spec = match family {
                FamilyArg::Regular => GraphSpec::Regular { n, degree, seed },
                FamilyArg::RegularTree => GraphSpec::RegularTree { branching: n, depth },
                FamilyArg::Cycle => GraphSpec::Cycle { n },
                FamilyArg::Path => GraphSpec::Path { n },
                FamilyArg::Complete => GraphSpec::Complete { n },
            };
            let g = spec.build()?;
            if check_volume {
                g.check_volume_bounds()?;
            }
            std::fs::write(&out, g.to_edge_list()).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "{}",
                serde_json::json!({"n": g.n(), "edges": g.edge_count(), "diameter": g.diameter(), "out": out})
            );
            Ok(true)
        }
        Command::Run {
            config,
            output_dir,
            workers,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if output_dir.is_some() {
                cfg.output.dir = output_dir;
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            let s = run_campaign(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&s.aggregates)?);
            let ok = s
                .aggregates
                .aux
                .as_ref()
                .is_none_or(|a| a.upper_breaches == 0 && a.equality_breaches == 0);
            if !ok {
                eprintln!("comparison breached; see breaches.jsonl");
            }
            Ok(ok)
        }
        Command::VerifyBounds { config, dir } => verify(&ExperimentConfig::load(&config)?, &dir),
        Command::Analyze { config, dir } => analyze(&ExperimentConfig::load(&config)?, &dir),
        Command::Schedule { n, k, mu_s, a } => {
            let p: AuxParams = match schedule_params(n, k, mu_s, a) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("warning: {e}");
                    regspec::auxiliary::schedule_params_unchecked(n, k, mu_s, a)?
                }
            };
            let b = error_budget(n, k, mu_s, a)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "params": p,
                    "tau_max": AuxParams::tau_max(k, n),
                    "budget": b,
                }))?
            );
            if !b.feasible {
                eprintln!("warning: parameters infeasible, error terms do not vanish");
            }
            Ok(true)
        }
    }
}

fn load(cfg: &ExperimentConfig, dir: &Path) -> Result<(Graph, Vec<regspec::experiment::RealizationRecord>)> {
    let g = cfg.graph.build()?;
    let records = load_records(&records_path(dir))?;
    let hash = cfg.hash();
    if let Some(r) = records.iter().find(|r| r.config_hash != hash) {
        bail!("record {} was produced by a different config", r.index);
    }
    Ok((g, records))
}

fn verify(cfg: &ExperimentConfig, dir: &Path) -> Result<bool> {
    let (g, records) = load(cfg, dir)?;
    let mut ok = true;
    let mut line = |name: String, pass: bool, detail: String| {
        ok &= pass;
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };
    let density = cfg.effective_density()?;
    if let Some(c) = &cfg.checks {
        let column = |i: usize| -> Vec<usize> { records.iter().map(|r| r.check_counts[i]).collect() };
        for (i, &len) in c.wegner_lengths.iter().enumerate() {
            let w = wegner_check(&column(i), density, g.n(), len)?;
            line(
                format!("wegner |J|={len}"),
                w.holds,
                format!("ratio {:.4} ± {:.4}", w.ratio, w.ratio_stderr),
            );
        }
        for (i, &len) in c.minami_lengths.iter().enumerate() {
            let m = minami_check(&column(c.wegner_lengths.len() + i), density, g.n(), len, c.minami_k)?;
            match m.holds {
                Some(h) => line(
                    format!("minami k={} |J|={len}", m.k),
                    h,
                    format!("P {:.4} ± {:.4} vs bound {:.4}", m.probability, m.stderr, m.bound),
                ),
                None => println!("SKIP minami k={} |J|={len}: bound {:.3} is vacuous", m.k, m.bound),
            }
        }
    }
    if let Some(p) = cfg.aux_params(g.n(), g.branching())? {
        let breaches = records
            .iter()
            .filter(|r| r.aux.as_ref().is_some_and(|a| a.upper_breach || a.equality_breach))
            .count();
        line("comparison".into(), breaches == 0, format!("{breaches} breaches of {}", records.len()));
        if !records.is_empty() {
            let fields = selected_fields(&records, g.n())?;
            let rep = bound_report(&fields, &g, 6 * p.radius, &cfg.t_grid)?;
            let worst = rep.grid.iter().map(|r| r.gap).fold(0.0, f64::max);
            line(
                "chen-stein".into(),
                rep.violations().is_empty(),
                format!("sup gap {worst:.4} vs bound {:.4} (lambda {:.4})", rep.bound, rep.lambda_bar),
            );
        }
    }
    Ok(ok)
}

fn analyze(cfg: &ExperimentConfig, dir: &Path) -> Result<bool> {
    let (_, records) = load(cfg, dir)?;
    if records.is_empty() {
        bail!("no records in {}", dir.display());
    }
    let nus: Vec<u64> = records.iter().map(|r| r.nu as u64).collect();
    let mean = nus.iter().sum::<u64>() as f64 / nus.len() as f64;
    let lap = laplace_gap(&nus, mean, &cfg.t_grid)?;
    let mut csv = String::from("t,empirical,poisson,gap,stderr\n");
    for r in &lap.rows {
        writeln!(csv, "{},{},{},{},{}", r.t, r.empirical, r.reference, r.gap, r.stderr)?;
    }
    std::fs::write(dir.join("laplace.csv"), csv)?;
    let sets: Vec<Vec<f64>> = records.iter().map(|r| r.points.clone()).collect();
    let gaps = gap_statistics(&sets)?;
    let mut csv = String::from("lo,hi,count,expected\n");
    for b in &gaps.histogram {
        writeln!(csv, "{},{},{},{}", b.lo, b.hi, b.count, b.expected)?;
    }
    std::fs::write(dir.join("gaps.csv"), csv)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "mean_nu": mean,
            "laplace_sup_gap": lap.sup,
            "gaps": gaps.gaps,
            "ks": gaps.ks,
            "spacing_ratio": gaps.spacing_ratio,
        }))?
    );
    Ok(true)
}
