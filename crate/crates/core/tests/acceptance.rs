//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. `ACCEPTANCE_ONLY=1,5` restricts the run.

use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use regspec::auxiliary::{independence_probe, locminami_bound};
use regspec::experiment::{
    gap_statistics, minami_check, run_campaign, selected_fields, wegner_check, AuxConfig,
    ChecksConfig, DisorderConfig, ExperimentConfig, GraphSpec, OutputConfig, RealizationRecord,
    WindowConfig,
};
use regspec::graph::Graph;
use regspec::hamiltonian::{assemble, restrict_neumann, DisorderSpec, Ensemble, Family};
use regspec::localization::check_approx_eigenvector;
use regspec::poisson::{bound_report, default_t_grid, BernoulliFieldStats, SyntheticField};
use regspec::seed::rng_from_seed;
use regspec::spectral::{decay_rate_fit, eigendecompose, fractional_moment_profile};

type Outcome = regspec::Result<(bool, String)>;

fn config(n: usize, alpha: f64, lo: f64, hi: f64, realizations: usize, base_seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        graph: GraphSpec::Regular { n, degree: 3, seed: base_seed ^ 0x5eed },
        disorder: DisorderConfig {
            family: Family::Uniform,
            rho0: 1.0,
            alpha,
        },
        window: WindowConfig { energy: 0.0, lo, hi },
        aux: None,
        mu: None,
        realizations,
        base_seed,
        t_grid: default_t_grid(),
        checks: None,
        output: OutputConfig::default(),
        workers: None,
    }
}

fn approximate_eigenvalues() -> Outcome {
    let (n, radius, epsilon) = (300, 2, 0.05);
    let mut calls = 0usize;
    let mut skipped = 0usize;
    let mut failures = 0usize;
    let mut worst = 0.0f64;
    for (alpha, base) in [(5.0, 101u64), (15.0, 102)] {
        let g = Graph::random_regular(n, 3, base)?;
        let ens = Ensemble {
            spec: DisorderSpec::uniform(1.0)?,
            alpha,
            base_seed: base,
        };
        for i in 0..100u64 {
            let w = ens.realization(n, i)?;
            let h = assemble(&g, &w)?;
            let es = eigendecompose(&h)?;
            for x in 0..n {
                let b = g.ball(x, radius)?;
                let hb = restrict_neumann(&g, &w, &b)?;
                let local = eigendecompose(&hb)?;
                for j in 0..local.len() {
                    calls += 1;
                    let r = match check_approx_eigenvector(&g, &h, &b, local.vector(j), local.values()[j], &es, epsilon) {
                        Ok(r) => r,
                        Err(regspec::Error::Precondition(_)) => {
                            skipped += 1;
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    if r.gap.bound > 0.0 {
                        worst = worst.max(r.gap.value / r.gap.bound);
                    }
                    if !r.gap.holds {
                        failures += 1;
                    }
                }
            }
        }
    }
    Ok((
        failures == 0 && skipped == 0,
        format!("{calls} checks, {failures} failures, {skipped} unverified, largest gap/bound {worst:.3}"),
    ))
}

fn comparison() -> Outcome {
    let mut cfg = config(500, 15.0, -2.0, 2.0, 500, 202);
    cfg.aux = Some(AuxConfig::Manual {
        radius: 2,
        tau: 1e-3,
        c: None,
    });
    cfg.mu = Some(3.0);
    let s = run_campaign(&cfg)?;
    let a = s.aggregates.aux.expect("auxiliary aggregates");
    Ok((
        a.upper_breaches == 0 && a.equality_breaches == 0,
        format!(
            "{} realizations, Omega {} / Omega' {}, eta<=nu breaches {}, eta=nu breaches {}",
            s.records.len(),
            a.omega,
            a.omega_prime,
            a.upper_breaches,
            a.equality_breaches
        ),
    ))
}

/// Shared values-only campaign for the Wegner and Minami criteria.
fn counting_records() -> regspec::Result<(ExperimentConfig, Vec<RealizationRecord>)> {
    let mut cfg = config(500, 1.0, -1.0, 1.0, 5000, 303);
    cfg.checks = Some(ChecksConfig {
        center: 0.0,
        wegner_lengths: vec![0.001, 0.01],
        minami_lengths: vec![0.002],
        minami_k: 2,
    });
    let s = run_campaign(&cfg)?;
    Ok((cfg, s.records))
}

fn wegner(cfg: &ExperimentConfig, records: &[RealizationRecord]) -> Outcome {
    let density = cfg.effective_density()?;
    let first = &records[..2000];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, &len) in [0.001, 0.01].iter().enumerate() {
        let counts: Vec<usize> = first.iter().map(|r| r.check_counts[i]).collect();
        let w = wegner_check(&counts, density, 500, len)?;
        ok &= w.holds;
        parts.push(format!("|J|={len}: E[N]={:.4} bound {:.4} ratio {:.3}±{:.3}", w.mean, w.bound, w.ratio, w.ratio_stderr));
    }
    Ok((ok, format!("2000 realizations; {}", parts.join("; "))))
}

fn minami(cfg: &ExperimentConfig, records: &[RealizationRecord]) -> Outcome {
    let counts: Vec<usize> = records.iter().map(|r| r.check_counts[2]).collect();
    let m = minami_check(&counts, cfg.effective_density()?, 500, 0.002, 2)?;
    let detail = format!(
        "{} realizations, P[N>=2]={:.5}±{:.5} bound {:.4}{}",
        m.samples,
        m.probability,
        m.stderr,
        m.bound,
        if m.vacuous { " (vacuous)" } else { "" }
    );
    Ok((m.holds.unwrap_or(false), detail))
}

fn chen_stein() -> Outcome {
    let g = Graph::random_regular(200, 3, 404)?;
    let grid = default_t_grid();
    let mut ok = true;
    let mut parts = Vec::new();
    for (field, seed) in [
        (SyntheticField::Independent { p: 0.01 }, 1u64),
        (SyntheticField::NeighborOr { q: 0.0025 }, 2),
    ] {
        let mut rng = rng_from_seed(seed);
        let fields: Vec<Vec<bool>> = (0..20_000).map(|_| field.sample(&g, &mut rng)).collect();
        let rep = bound_report(&fields, &g, field.dependence_radius(), &grid)?;
        let bad = rep.violations();
        ok &= bad.is_empty() && rep.grid.len() == 21;
        let sup = rep.grid.iter().map(|r| r.gap).fold(0.0, f64::max);
        parts.push(format!(
            "radius {}: lambda {:.3} sup gap {:.4} bound {:.4} violations {}",
            field.dependence_radius(),
            rep.lambda_bar,
            sup,
            rep.bound,
            bad.len()
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn poisson_statistics() -> Outcome {
    let cfg = config(1000, 15.0, -1000.0, 1000.0, 100, 606);
    let s = run_campaign(&cfg)?;
    let sets: Vec<Vec<f64>> = s.records.iter().map(|r| r.points.clone()).collect();
    let gs = gap_statistics(&sets)?;
    // Spacing-ratio mean of 10^6 i.i.d. uniform levels.
    let oracle = 0.386516;
    Ok((
        gs.gaps >= 5000 && gs.ks <= 0.05 && (gs.spacing_ratio - oracle).abs() <= 0.02,
        format!("{} gaps, KS {:.4}, r {:.4} (target {oracle})", gs.gaps, gs.ks, gs.spacing_ratio),
    ))
}

fn localization_trend() -> Outcome {
    let n = 500;
    let g = Graph::random_regular(n, 3, 707)?;
    let distances: Vec<usize> = (1..=6).collect();
    let z = Complex64::new(0.0, 1.0 / n as f64);
    let mut fits = Vec::new();
    let mut decreasing = true;
    for (alpha, base) in [(15.0, 71u64), (0.5, 72)] {
        let ens = Ensemble {
            spec: DisorderSpec::uniform(1.0)?,
            alpha,
            base_seed: base,
        };
        let prof = fractional_moment_profile(&ens, &g, 0, &distances, z, 0.5, 200)?;
        let pts: Vec<(f64, f64)> = prof.iter().map(|p| (p.distance as f64, p.mean)).collect();
        if alpha == 15.0 {
            decreasing = prof.windows(2).all(|w| w[1].mean < w[0].mean);
        }
        fits.push(decay_rate_fit(&pts)?);
    }
    let (strong, weak) = (fits[0], fits[1]);
    Ok((
        decreasing && strong.mu_hat > 0.0 && strong.r_squared >= 0.8 && weak.mu_hat < strong.mu_hat,
        format!(
            "alpha=15: mu {:.3} r2 {:.3} decreasing {decreasing}; alpha=0.5: mu {:.3}",
            strong.mu_hat, strong.r_squared, weak.mu_hat
        ),
    ))
}

fn independence() -> Outcome {
    let radius = 1;
    let mut cfg = config(500, 15.0, -250.0, 250.0, 500, 808);
    cfg.aux = Some(AuxConfig::Manual {
        radius,
        tau: 0.2,
        c: None,
    });
    cfg.mu = Some(3.0);
    let g = cfg.graph.build()?;
    let s = run_campaign(&cfg)?;
    let p = s.params.expect("manual parameters");
    let fields = selected_fields(&s.records, g.n())?;

    let mut pairs = Vec::new();
    let mut used = vec![false; g.n()];
    for x in 0..g.n() {
        if pairs.len() == 10 {
            break;
        }
        if used[x] {
            continue;
        }
        let dist = g.distances_from(x)?;
        if let Some(y) = (0..g.n()).find(|&y| !used[y] && dist[y] as usize > 6 * radius) {
            used[x] = true;
            used[y] = true;
            pairs.push((x, y));
        }
    }
    let mut cov_ok = pairs.len() >= 10;
    let mut worst = 0.0f64;
    for &(x, y) in &pairs {
        let c = independence_probe(&fields, &g, &p, x, y)?;
        cov_ok &= c.holds;
        if c.stderr > 0.0 {
            worst = worst.max(c.cov.abs() / c.stderr);
        }
    }

    let bound = locminami_bound(cfg.effective_density()?, cfg.base_interval()?.len(), p.k, g.n(), p.tau, p.radius);
    let stats = BernoulliFieldStats::from_samples(&fields, &g, 6 * radius)?;
    let m = fields.len() as f64;
    let mut pair_ok = true;
    let mut largest = 0.0f64;
    for &e in stats.pairs.values() {
        largest = largest.max(e);
        pair_ok &= e <= bound + 3.0 * (e * (1.0 - e) / m).sqrt();
    }
    let lambda = stats.lambda_bar;
    Ok((
        cov_ok && pair_ok,
        format!(
            "{} pairs beyond 6R, max |cov|/stderr {worst:.2}; max E[b_x b_y] {largest:.4} vs bound {bound:.4}; lambda {lambda:.3}",
            pairs.len()
        ),
    ))
}

fn determinism() -> Outcome {
    let mut outputs = Vec::new();
    for workers in [1, 4, 8] {
        let dir = tempfile::tempdir()?;
        let mut cfg = config(200, 10.0, -100.0, 100.0, 40, 909);
        cfg.aux = Some(AuxConfig::Manual {
            radius: 2,
            tau: 1e-2,
            c: None,
        });
        cfg.mu = Some(2.0);
        cfg.output = OutputConfig {
            dir: Some(dir.path().to_path_buf()),
            verbose: true,
        };
        cfg.workers = Some(workers);
        run_campaign(&cfg)?;
        let files: Vec<Vec<u8>> = ["realizations.jsonl", "breaches.jsonl", "localization.jsonl", "summary.json"]
            .iter()
            .map(|f| std::fs::read(dir.path().join(f)))
            .collect::<std::io::Result<_>>()?;
        outputs.push(files);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    Ok((same, format!("1/4/8 workers, {} bytes of records", outputs[0][0].len())))
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |i: usize| only.as_ref().is_none_or(|o| o.contains(&i));
    let mut all = true;
    let mut report = |i: usize, name: &str, start: Instant, r: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok((ok, detail)) => {
                all &= ok;
                println!("{} criterion {i} {name}: {detail} [{secs:.1}s]", if ok { "PASS" } else { "FAIL" });
            }
            Err(e) => {
                all = false;
                println!("FAIL criterion {i} {name}: error {e} [{secs:.1}s]");
            }
        }
    };

    let t = Instant::now();
    if wanted(1) {
        report(1, "approximate eigenvalues", t, approximate_eigenvalues());
    }
    let t = Instant::now();
    if wanted(2) {
        report(2, "eta versus nu", t, comparison());
    }
    if wanted(3) || wanted(4) {
        let t = Instant::now();
        match counting_records() {
            Ok((cfg, records)) => {
                if wanted(3) {
                    report(3, "wegner", t, wegner(&cfg, &records));
                }
                if wanted(4) {
                    report(4, "minami", t, minami(&cfg, &records));
                }
            }
            Err(e) => {
                let msg = e.to_string();
                if wanted(3) {
                    report(3, "wegner", t, Err(regspec::Error::Config(msg.clone())));
                }
                if wanted(4) {
                    report(4, "minami", t, Err(regspec::Error::Config(msg)));
                }
            }
        }
    }
    let t = Instant::now();
    if wanted(5) {
        report(5, "chen-stein", t, chen_stein());
    }
    let t = Instant::now();
    if wanted(6) {
        report(6, "poisson statistics", t, poisson_statistics());
    }
    let t = Instant::now();
    if wanted(7) {
        report(7, "localization trend", t, localization_trend());
    }
    let t = Instant::now();
    if wanted(8) {
        report(8, "independence", t, independence());
    }
    let t = Instant::now();
    if wanted(9) {
        report(9, "determinism", t, determinism());
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
