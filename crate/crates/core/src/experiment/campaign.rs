use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{
    error_budget, gap_statistics, minami_check, wegner_check, ErrorBudget, GapStatistics,
    MinamiReport, WegnerReport, MIN_CHECK_SAMPLES, MIN_GAPS,
};
use super::config::{AuxConfig, ExperimentConfig};
use crate::auxiliary::{
    auxiliary_process, breach_dump, compare_eta_nu, detect_events, window_profiles, AuxParams,
    BreachDump, EventFlags, VertexRecord,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hamiltonian::{assemble, Ensemble};
use crate::localization::{envelope_max, write_localization_jsonl, LocalizationProfile};
use crate::poisson::{chen_stein_bound, histogram, laplace_gap, tv_to_poisson, BernoulliFieldStats, LaplaceGap};
use crate::spectral::{count_sorted, eigendecompose, eigenvalues, rescaled_points, Interval, RescaledWindow};

pub const RECORDS_FILE: &str = "realizations.jsonl";
pub const BREACHES_FILE: &str = "breaches.jsonl";
pub const LOCALIZATION_FILE: &str = "localization.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxSummary {
    pub eta: usize,
    pub f_size: usize,
    pub cluster_sizes: Vec<usize>,
    /// Vertices with `b_x = 1`.
    pub selected: Vec<usize>,
    pub flags: EventFlags,
    /// `X_n`.
    pub envelope: f64,
    pub upper_breach: bool,
    pub equality_breach: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vertices: Option<Vec<VertexRecord>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub index: usize,
    pub seed: u64,
    pub config_hash: String,
    /// `N(I_n)`.
    pub nu: usize,
    /// Rescaled eigenvalues `n(λ - E)` inside `I`, ascending.
    pub points: Vec<f64>,
    /// `N(J)` for each check interval.
    pub check_counts: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub aux: Option<AuxSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxAggregate {
    pub mean_eta: f64,
    pub eta_equals_nu: usize,
    pub omega: usize,
    pub omega_prime: usize,
    pub upper_breaches: usize,
    pub equality_breaches: usize,
    pub max_envelope: f64,
    pub mean_f_size: f64,
    /// `λ̄ = Σ_x E[b_x]`.
    pub lambda_bar: f64,
    /// Chen–Stein bound of the selected field at dependence radius `6R`.
    pub chen_stein: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub realizations: usize,
    pub n: usize,
    pub mean_nu: f64,
    /// `mean ν / |I|`.
    pub intensity: f64,
    pub nu_histogram: Vec<u64>,
    pub tv_to_poisson: Option<f64>,
    pub laplace: Option<LaplaceGap>,
    pub aux: Option<AuxAggregate>,
    pub wegner: Vec<WegnerReport>,
    pub minami: Vec<MinamiReport>,
    pub gaps: Option<GapStatistics>,
    pub error_budget: Option<ErrorBudget>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSummary {
    pub config_hash: String,
    pub params: Option<AuxParams>,
    pub aggregates: Aggregates,
    pub records: Vec<RealizationRecord>,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config_hash: &'a str,
    config: ExperimentConfig,
    params: Option<AuxParams>,
    aggregates: &'a Aggregates,
}

struct Context<'a> {
    graph: &'a Graph,
    ensemble: Ensemble,
    window: RescaledWindow,
    params: Option<AuxParams>,
    mu: f64,
    checks: Vec<Interval>,
    hash: String,
    verbose: bool,
}

struct Realized {
    record: RealizationRecord,
    breach: Option<BreachDump>,
    profiles: Vec<LocalizationProfile>,
}

impl Context<'_> {
    fn realize(&self, index: usize) -> Result<Realized> {
        let g = self.graph;
        let w = self.ensemble.realization(g.n(), index as u64)?;
        let h = assemble(g, &w)?;
        let mut out = Realized {
            record: RealizationRecord {
                index,
                seed: w.seed,
                config_hash: self.hash.clone(),
                nu: 0,
                points: Vec::new(),
                check_counts: Vec::new(),
                aux: None,
            },
            breach: None,
            profiles: Vec::new(),
        };
        let values = match &self.params {
            None => eigenvalues(&h)?,
            Some(p) => {
                let es = eigendecompose(&h)?;
                let values = es.values().to_vec();
                let outcome = auxiliary_process(g, &w, &self.window, p)?;
                let profiles = window_profiles(&es, g, &self.window, self.mu)?;
                let flags = detect_events(&values, &outcome, &self.window, p, &profiles);
                let cmp = compare_eta_nu(&outcome, &values, &self.window, flags);
                if cmp.breach() {
                    out.breach = Some(breach_dump(w.seed, cmp, &outcome, &values));
                }
                out.record.aux = Some(AuxSummary {
                    eta: cmp.eta,
                    f_size: outcome.f_count,
                    cluster_sizes: outcome.cluster_sizes(),
                    selected: outcome.vertices.iter().filter(|v| v.in_e).map(|v| v.vertex).collect(),
                    flags,
                    envelope: envelope_max(&profiles),
                    upper_breach: cmp.upper_breach,
                    equality_breach: cmp.equality_breach,
                    vertices: self.verbose.then(|| outcome.vertices.clone()),
                });
                if self.verbose {
                    out.profiles = profiles;
                }
                values
            }
        };
        out.record.nu = count_sorted(&values, self.window.scaled());
        out.record.points = rescaled_points(&values, &self.window);
        out.record.check_counts = self.checks.iter().map(|&j| count_sorted(&values, j)).collect();
        Ok(out)
    }
}

struct Sinks {
    records: BufWriter<File>,
    breaches: BufWriter<File>,
    localization: Option<BufWriter<File>>,
}

impl Sinks {
    fn open(dir: &Path, verbose: bool) -> Result<Sinks> {
        std::fs::create_dir_all(dir)?;
        let open = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
        Ok(Sinks {
            records: open(RECORDS_FILE)?,
            breaches: open(BREACHES_FILE)?,
            localization: if verbose { Some(open(LOCALIZATION_FILE)?) } else { None },
        })
    }

    fn write(&mut self, r: &Realized) -> Result<()> {
        serde_json::to_writer(&mut self.records, &r.record)?;
        writeln!(self.records)?;
        if let Some(b) = &r.breach {
            serde_json::to_writer(&mut self.breaches, b)?;
            writeln!(self.breaches)?;
        }
        if let Some(l) = &mut self.localization {
            write_localization_jsonl(l, r.record.index, &r.profiles)?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.records.flush()?;
        self.breaches.flush()?;
        if let Some(l) = &mut self.localization {
            l.flush()?;
        }
        Ok(())
    }
}

/// Run every realization of `cfg`, write the outputs and aggregate.
///
/// Realizations are computed in parallel in blocks and written in index
/// order, so output files do not depend on the worker count. On failure the
/// records completed before the failing index are flushed and the error is
/// tagged with that index.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let graph = cfg.graph.build()?;
    run_campaign_on(cfg, &graph)
}

/// [`run_campaign`] on an already built graph.
pub fn run_campaign_on(cfg: &ExperimentConfig, graph: &Graph) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let n = graph.n();
    let k = graph.branching();
    let params = cfg.aux_params(n, k)?;
    let ctx = Context {
        graph,
        ensemble: cfg.ensemble()?,
        window: cfg.window_for(n, params.map_or(0.0, |p| p.epsilon))?,
        params,
        mu: if params.is_some() { cfg.rate(k)? } else { cfg.mu.unwrap_or(0.0) },
        checks: cfg.check_intervals()?,
        hash: cfg.hash(),
        verbose: cfg.output.verbose,
    };
    let workers = cfg.workers.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut sinks = match &cfg.output.dir {
        Some(dir) => Some(Sinks::open(dir, cfg.output.verbose)?),
        None => None,
    };
    let block = 4 * workers;
    let mut records = Vec::with_capacity(cfg.realizations);
    let mut start = 0;
    while start < cfg.realizations {
        let end = (start + block).min(cfg.realizations);
        let results: Vec<Result<Realized>> =
            pool.install(|| (start..end).into_par_iter().map(|i| ctx.realize(i)).collect());
        for (i, r) in (start..).zip(results) {
            match r {
                Ok(r) => {
                    if let Some(s) = &mut sinks {
                        s.write(&r)?;
                    }
                    records.push(r.record);
                }
                Err(e) => {
                    if let Some(s) = &mut sinks {
                        s.flush()?;
                    }
                    return Err(Error::at_realization(i)(e));
                }
            }
        }
        if let Some(s) = &mut sinks {
            s.flush()?;
        }
        start = end;
    }
    let aggregates = aggregate(cfg, graph, &records)?;
    if let Some(dir) = &cfg.output.dir {
        let file = SummaryFile {
            config_hash: &ctx.hash,
            config: cfg.canonical(),
            params,
            aggregates: &aggregates,
        };
        let mut out = BufWriter::new(File::create(dir.join(SUMMARY_FILE))?);
        serde_json::to_writer_pretty(&mut out, &file)?;
        writeln!(out)?;
        out.flush()?;
    }
    Ok(ExperimentSummary {
        config_hash: ctx.hash,
        params,
        aggregates,
        records,
    })
}

/// Aggregates computed from the records alone.
pub fn aggregate(cfg: &ExperimentConfig, graph: &Graph, records: &[RealizationRecord]) -> Result<Aggregates> {
    let n = graph.n();
    let k = graph.branching();
    let m = records.len();
    let nus: Vec<u64> = records.iter().map(|r| r.nu as u64).collect();
    let mean_nu = if m == 0 { 0.0 } else { nus.iter().sum::<u64>() as f64 / m as f64 };
    let hist = histogram(&nus);
    let (tv, laplace) = if m == 0 {
        (None, None)
    } else {
        (
            Some(tv_to_poisson(&hist, mean_nu)?),
            Some(laplace_gap(&nus, mean_nu, &cfg.t_grid)?),
        )
    };

    let params = cfg.aux_params(n, k)?;
    let aux = match params {
        Some(p) if m > 0 => {
            let summaries = records
                .iter()
                .map(|r| {
                    r.aux
                        .as_ref()
                        .ok_or_else(|| Error::Config(format!("record {} lacks auxiliary data", r.index)))
                })
                .collect::<Result<Vec<_>>>()?;
            let fields = selected_fields(records, n)?;
            let stats = BernoulliFieldStats::from_samples(&fields, graph, 6 * p.radius)?;
            let count = |pred: &dyn Fn(&RealizationRecord, &AuxSummary) -> bool| {
                records.iter().zip(&summaries).filter(|(r, a)| pred(r, a)).count()
            };
            Some(AuxAggregate {
                mean_eta: summaries.iter().map(|a| a.eta).sum::<usize>() as f64 / m as f64,
                eta_equals_nu: count(&|r, a| a.eta == r.nu),
                omega: count(&|_, a| a.flags.omega()),
                omega_prime: count(&|_, a| a.flags.omega_prime()),
                upper_breaches: count(&|_, a| a.upper_breach),
                equality_breaches: count(&|_, a| a.equality_breach),
                max_envelope: summaries.iter().map(|a| a.envelope).fold(0.0, f64::max),
                mean_f_size: summaries.iter().map(|a| a.f_size).sum::<usize>() as f64 / m as f64,
                lambda_bar: stats.lambda_bar,
                chen_stein: chen_stein_bound(&stats, graph)?,
            })
        }
        _ => None,
    };

    let mut wegner = Vec::new();
    let mut minami = Vec::new();
    if let Some(c) = &cfg.checks {
        if m >= MIN_CHECK_SAMPLES {
            let density = cfg.effective_density()?;
            let column = |i: usize| -> Vec<usize> { records.iter().map(|r| r.check_counts[i]).collect() };
            for (i, &len) in c.wegner_lengths.iter().enumerate() {
                wegner.push(wegner_check(&column(i), density, n, len)?);
            }
            let offset = c.wegner_lengths.len();
            for (i, &len) in c.minami_lengths.iter().enumerate() {
                minami.push(minami_check(&column(offset + i), density, n, len, c.minami_k)?);
            }
        }
    }

    let sets: Vec<Vec<f64>> = records.iter().map(|r| r.points.clone()).collect();
    let gap_count: usize = sets.iter().map(|s| s.len().saturating_sub(1)).sum();
    let gaps = if gap_count >= MIN_GAPS { Some(gap_statistics(&sets)?) } else { None };

    let error_budget = match &cfg.aux {
        Some(AuxConfig::Schedule { mu_s, a }) => Some(error_budget(n, k, *mu_s, *a)?),
        _ => None,
    };

    Ok(Aggregates {
        realizations: m,
        n,
        mean_nu,
        intensity: mean_nu / cfg.base_interval()?.len(),
        nu_histogram: hist,
        tv_to_poisson: tv,
        laplace,
        aux,
        wegner,
        minami,
        gaps,
        error_budget,
    })
}

/// The field `(b_x)` of every record, from its selected vertices.
pub fn selected_fields(records: &[RealizationRecord], n: usize) -> Result<Vec<Vec<bool>>> {
    records
        .iter()
        .map(|r| {
            let a = r
                .aux
                .as_ref()
                .ok_or_else(|| Error::Config(format!("record {} lacks auxiliary data", r.index)))?;
            let mut f = vec![false; n];
            for &x in &a.selected {
                *f.get_mut(x).ok_or(Error::InvalidVertex { vertex: x, n })? = true;
            }
            Ok(f)
        })
        .collect()
}

/// Read a realization file written by [`run_campaign`].
pub fn load_records(path: &Path) -> Result<Vec<RealizationRecord>> {
    let file = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn records_path(dir: &Path) -> PathBuf {
    dir.join(RECORDS_FILE)
}
