//! Argument parsing and subcommand dispatch.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use dpkmedian::dp::mechanisms::{exponential_mechanism, laplace_sample};
use dpkmedian::geometry::{self, CenterSet, Dataset, Point};
use dpkmedian::kmedian::{exact_kmedian_oracle, local_search_kmedian};
use dpkmedian::pipeline::{run_pipeline, PipelineConfig, PipelineError};
use dpkmedian::{threshold_cover, verify_cover_bound, PrivacyBudget, SeededRng};

use crate::data::{load_dataset, NormMap};
use crate::report::{
    BenchCell, BenchSection, CoverSection, InputEcho, MechanismsSection, OracleSection,
    PipelineCell, PipelineSection, Report,
};
use crate::CliError;

/// Swap budget used whenever a subcommand needs a non-private baseline.
const BASELINE_SWAPS: usize = 100;

/// Instance bounds under which the exhaustive oracle is preferred.
const ORACLE_N: usize = 12;
const ORACLE_K: usize = 3;

#[derive(Debug, Parser)]
#[command(
    name = "dpkmedian",
    version,
    about = "Seeded differentially private k-median experiments: CSV in, JSON report out"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify the threshold-cover cost bound on a dataset.
    CoverCheck(RunArgs),
    /// Run the five-stage private pipeline.
    Pipeline(RunArgs),
    /// Solve a tiny instance with the exhaustive oracle.
    Oracle(RunArgs),
    /// Seeded distribution diagnostics for the noise mechanisms.
    Mechanisms(RunArgs),
    /// Concurrent seed sweep of the pipeline against a non-private baseline.
    Bench(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CoverCheck(_) => "cover-check",
            Command::Pipeline(_) => "pipeline",
            Command::Oracle(_) => "oracle",
            Command::Mechanisms(_) => "mechanisms",
            Command::Bench(_) => "bench",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::CoverCheck(a)
            | Command::Pipeline(a)
            | Command::Oracle(a)
            | Command::Mechanisms(a)
            | Command::Bench(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Input CSV: one point per row; a trailing weight column is selected by
    /// naming the final header field `weight`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Number of centers.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Approximation parameter in (0, 1/2].
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    /// Privacy budget epsilon for private subcommands.
    #[arg(long = "eps-p", default_value_t = 1.0)]
    pub eps_p: f64,
    /// Privacy budget delta for private subcommands.
    #[arg(long = "delta-p", default_value_t = 1e-6)]
    pub delta_p: f64,
    /// Root seed; all randomness derives from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seeded repetitions (pipeline, bench) or draw count (mechanisms).
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Translate to the centroid and scale the max norm to 1 before
    /// solving; centers are always reported in the original coordinates.
    #[arg(long, default_value_t = false)]
    pub normalize: bool,
    /// Override the projected dimension.
    #[arg(long = "d-prime")]
    pub d_prime: Option<usize>,
    /// Stage budget fractions a,b,c; default 1/3 each.
    #[arg(long = "budget-split", value_parser = parse_split)]
    pub budget_split: Option<[f64; 3]>,
}

fn parse_split(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated fractions a,b,c".to_string());
    }
    let mut out = [0.0f64; 3];
    for (slot, part) in out.iter_mut().zip(parts.iter()) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("fraction {part:?} is not numeric"))?;
    }
    Ok(out)
}

/// Runs a parsed invocation and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let args = cli.command.args();
    if args.repeats == 0 {
        return Err(CliError::Validation("repeats must be at least 1".into()));
    }
    let mut report = Report::new(cli.command.name(), echo(args));
    match &cli.command {
        Command::CoverCheck(args) => run_cover_check(args, &mut report)?,
        Command::Pipeline(args) => run_pipeline_cmd(args, &mut report)?,
        Command::Oracle(args) => run_oracle(args, &mut report)?,
        Command::Mechanisms(args) => run_mechanisms(args, &mut report)?,
        Command::Bench(args) => run_bench(args, &mut report)?,
    }
    let json = report.to_json();
    match &args.output {
        Some(path) => std::fs::write(path, json).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?,
        None => print!("{json}"),
    }
    Ok(())
}

fn echo(args: &RunArgs) -> InputEcho {
    InputEcho {
        input: args.input.as_ref().map(|p| p.display().to_string()),
        output: args.output.as_ref().map(|p| p.display().to_string()),
        k: args.k,
        eps: args.eps,
        eps_p: args.eps_p,
        delta_p: args.delta_p,
        seed: args.seed,
        repeats: args.repeats,
        normalize: args.normalize,
        d_prime: args.d_prime,
        budget_split: args.budget_split.unwrap_or([1.0 / 3.0; 3]),
    }
}

struct Prepared {
    raw: Dataset,
    working: Dataset,
    map: NormMap,
    load_ms: f64,
}

fn prepare(args: &RunArgs) -> Result<Prepared, CliError> {
    let t0 = Instant::now();
    let path = args
        .input
        .as_ref()
        .ok_or_else(|| CliError::Validation("--input is required for this subcommand".into()))?;
    let loaded = load_dataset(path)?;
    let map = if args.normalize {
        NormMap::fit(&loaded.dataset)
    } else {
        NormMap::identity(loaded.dataset.dim())
    };
    let working = map.apply(&loaded.dataset)?;
    Ok(Prepared {
        raw: loaded.dataset,
        working,
        map,
        load_ms: ms(t0),
    })
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Maps centers from working coordinates back to the input's coordinates
/// and prices them on the raw data.
fn restored_cost(
    raw: &Dataset,
    map: &NormMap,
    centers: &CenterSet,
) -> Result<(Vec<Vec<f64>>, f64), CliError> {
    let coords: Vec<Vec<f64>> = centers
        .centers()
        .iter()
        .map(|c| map.restore(c.coords()))
        .collect();
    let points: Result<Vec<Point>, _> = coords.iter().cloned().map(Point::new).collect();
    let set =
        CenterSet::new(points.map_err(CliError::validation)?).map_err(CliError::validation)?;
    let cost = geometry::cost(raw, &set).map_err(CliError::validation)?;
    Ok((coords, cost))
}

fn pipeline_config(args: &RunArgs) -> Result<PipelineConfig, CliError> {
    let mut config = PipelineConfig::new(args.k, args.eps).map_err(CliError::validation)?;
    if let Some(d) = args.d_prime {
        config = config.with_d_prime(d).map_err(CliError::validation)?;
    }
    if let Some(split) = args.budget_split {
        config = config
            .with_budget_split(split)
            .map_err(CliError::validation)?;
    }
    Ok(config)
}

fn map_pipeline_err(err: PipelineError) -> CliError {
    match err {
        PipelineError::DegenerateCounts => CliError::Degenerate(err.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn run_cover_check(args: &RunArgs, report: &mut Report) -> Result<(), CliError> {
    let prepared = prepare(args)?;
    let t0 = Instant::now();
    let working = &prepared.working;
    let n = working.len();
    let use_oracle = n <= ORACLE_N && args.k <= ORACLE_K;
    let reference = if use_oracle {
        exact_kmedian_oracle(working, args.k)
    } else {
        let candidates = CenterSet::new(working.points().to_vec()).map_err(CliError::validation)?;
        local_search_kmedian(working, args.k, &candidates, BASELINE_SWAPS)
    }
    .map_err(CliError::validation)?;
    let r = reference.cost / n as f64;
    let enriched =
        threshold_cover(&reference.centers, r, args.eps, n).map_err(CliError::validation)?;
    let cover = verify_cover_bound(working, &reference.centers, &enriched, args.eps)
        .map_err(CliError::validation)?;
    report.cover = Some(CoverSection {
        n,
        dim: working.dim(),
        k: args.k,
        eps: args.eps,
        reference_method: if use_oracle {
            "exact-oracle"
        } else {
            "local-search"
        }
        .to_string(),
        reference_cost: reference.cost,
        report: cover,
    });
    report.timings_ms.insert("load".into(), prepared.load_ms);
    report.timings_ms.insert("solve".into(), ms(t0));
    Ok(())
}

fn run_pipeline_cmd(args: &RunArgs, report: &mut Report) -> Result<(), CliError> {
    let prepared = prepare(args)?;
    let config = pipeline_config(args)?;
    let budget = PrivacyBudget::new(args.eps_p, args.delta_p).map_err(CliError::validation)?;
    let t0 = Instant::now();
    let mut cells = Vec::with_capacity(args.repeats);
    for i in 0..args.repeats {
        let seed = args.seed.wrapping_add(i as u64);
        let mut rng = SeededRng::new(seed);
        let (centers, run) = run_pipeline(&prepared.working, &config, &budget, &mut rng)
            .map_err(map_pipeline_err)?;
        let (coords, final_cost) = restored_cost(&prepared.raw, &prepared.map, &centers)?;
        cells.push(PipelineCell {
            seed,
            run,
            centers: coords,
            final_cost,
        });
    }
    report.pipeline = Some(PipelineSection { cells });
    report.timings_ms.insert("load".into(), prepared.load_ms);
    report.timings_ms.insert("solve".into(), ms(t0));
    Ok(())
}

fn run_oracle(args: &RunArgs, report: &mut Report) -> Result<(), CliError> {
    let prepared = prepare(args)?;
    let t0 = Instant::now();
    let solved = exact_kmedian_oracle(&prepared.working, args.k).map_err(CliError::validation)?;
    let (coords, final_cost) = restored_cost(&prepared.raw, &prepared.map, &solved.centers)?;
    report.oracle = Some(OracleSection {
        n: prepared.working.len(),
        dim: prepared.working.dim(),
        k: args.k,
        cost_working: solved.cost,
        centers: coords,
        final_cost,
        iterations: solved.iterations,
    });
    report.timings_ms.insert("load".into(), prepared.load_ms);
    report.timings_ms.insert("solve".into(), ms(t0));
    Ok(())
}

fn run_mechanisms(args: &RunArgs, report: &mut Report) -> Result<(), CliError> {
    if !(args.eps > 0.0 && args.eps.is_finite()) {
        return Err(CliError::Validation(format!(
            "eps must be positive and finite, got {}",
            args.eps
        )));
    }
    let draws = args.repeats;
    let t0 = Instant::now();
    let root = SeededRng::new(args.seed);
    let scale = 1.0 / args.eps;

    let mut lap_rng = root.substream(1);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let x = laplace_sample(&mut lap_rng, scale).map_err(CliError::validation)?;
        sum += x;
        sum_sq += x * x;
    }
    let mean = sum / draws as f64;
    let var = sum_sq / draws as f64 - mean * mean;

    let mut exp_rng = root.substream(2);
    let scores = [0.0, 1.0];
    let mut gap_counts = [0usize; 2];
    for _ in 0..draws {
        let pick = exponential_mechanism(&scores, args.eps, 1.0, &mut exp_rng)
            .map_err(CliError::validation)?;
        gap_counts[pick] += 1;
    }
    let log_odds = ((gap_counts[1] as f64 + 0.5) / (gap_counts[0] as f64 + 0.5)).ln();

    let mut uni_rng = root.substream(3);
    let flat = [1.0f64; 4];
    let mut uniform_counts = vec![0usize; 4];
    for _ in 0..draws {
        let pick =
            exponential_mechanism(&flat, 0.0, 1.0, &mut uni_rng).map_err(CliError::validation)?;
        uniform_counts[pick] += 1;
    }
    let expected = draws as f64 / 4.0;
    let chi_square = uniform_counts
        .iter()
        .map(|c| {
            let d = *c as f64 - expected;
            d * d / expected
        })
        .sum();

    report.mechanisms = Some(MechanismsSection {
        draws,
        laplace_scale: scale,
        laplace_mean: mean,
        laplace_var: var,
        laplace_var_expected: 2.0 * scale * scale,
        exp_gap_counts: gap_counts,
        exp_log_odds: log_odds,
        exp_log_odds_expected: args.eps / 2.0,
        uniform_counts,
        uniform_chi_square: chi_square,
    });
    report.timings_ms.insert("solve".into(), ms(t0));
    Ok(())
}

fn run_bench(args: &RunArgs, report: &mut Report) -> Result<(), CliError> {
    let prepared = prepare(args)?;
    let config = pipeline_config(args)?;
    let budget = PrivacyBudget::new(args.eps_p, args.delta_p).map_err(CliError::validation)?;

    let t_base = Instant::now();
    let candidates =
        CenterSet::new(prepared.working.points().to_vec()).map_err(CliError::validation)?;
    let baseline = local_search_kmedian(&prepared.working, args.k, &candidates, BASELINE_SWAPS)
        .map_err(CliError::validation)?;
    let (_, baseline_cost) = restored_cost(&prepared.raw, &prepared.map, &baseline.centers)?;
    let baseline_ms = ms(t_base);

    // Independent seeded cells run concurrently; each cell is internally
    // sequential and collected in seed order.
    let t0 = Instant::now();
    let seeds: Vec<u64> = (0..args.repeats)
        .map(|i| args.seed.wrapping_add(i as u64))
        .collect();
    let cells: Result<Vec<BenchCell>, CliError> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = SeededRng::new(seed);
            let (centers, _) = run_pipeline(&prepared.working, &config, &budget, &mut rng)
                .map_err(map_pipeline_err)?;
            let (_, final_cost) = restored_cost(&prepared.raw, &prepared.map, &centers)?;
            Ok(BenchCell {
                seed,
                final_cost,
                ratio_vs_baseline: final_cost / baseline_cost,
            })
        })
        .collect();
    let cells = cells?;

    let mut ratios: Vec<f64> = cells.iter().map(|c| c.ratio_vs_baseline).collect();
    ratios.sort_by(f64::total_cmp);
    let median_ratio = if ratios.len() % 2 == 1 {
        ratios[ratios.len() / 2]
    } else {
        0.5 * (ratios[ratios.len() / 2 - 1] + ratios[ratios.len() / 2])
    };
    report.bench = Some(BenchSection {
        baseline_cost,
        cells,
        min_ratio: ratios[0],
        median_ratio,
        max_ratio: *ratios.last().expect("repeats validated"),
    });
    report.timings_ms.insert("load".into(), prepared.load_ms);
    report.timings_ms.insert("baseline".into(), baseline_ms);
    report.timings_ms.insert("solve".into(), ms(t0));
    Ok(())
}
