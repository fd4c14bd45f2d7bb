//! Seeded experiment runner: parses a TOML description, validates it, runs
//! every seed and writes one CSV per `(experiment, seed)` plus summaries with
//! bootstrap confidence intervals across seeds.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

pub use config::{
    validate, BaselineCentral, Diagnostic, DiffusionTrace, ExperimentConfig, ExperimentKind, FlRun, FlSetup, FlSweep,
    GraphSpec, MixingScan, VsteadyScaling,
};

use crate::data::{self, Dataset};
use crate::diffusion;
use crate::federation::{self, Dropout, FederationState, GainMode, RoundMetrics};
use crate::graph::{generate_connected, Graph, GraphModel};
use crate::spectral::{self, MarkovMatrix, MixingMethod};
use crate::stats;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<Diagnostic>),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("seed {seed}: {message}")]
    Runtime { seed: u64, message: String },
}

impl ExperimentError {
    /// True for problems with the configuration rather than its execution.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            ExperimentError::Parse(_) | ExperimentError::Config(_) | ExperimentError::UnknownPreset(_)
        )
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("vsteady_scaling", include_str!("../../presets/vsteady_scaling.toml")),
    (
        "diffusion_regular",
        include_str!("../../presets/diffusion_regular.toml"),
    ),
    ("diffusion_star", include_str!("../../presets/diffusion_star.toml")),
    ("mixing_scan", include_str!("../../presets/mixing_scan.toml")),
    ("quickstart", include_str!("../../presets/quickstart.toml")),
    ("plateau", include_str!("../../presets/plateau.toml")),
    ("dropout", include_str!("../../presets/dropout.toml")),
    ("estimates", include_str!("../../presets/estimates.toml")),
    ("baseline_central", include_str!("../../presets/baseline_central.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// TOML text of a built-in preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Result<ExperimentConfig, ExperimentError> {
    let text = preset_source(name).ok_or_else(|| ExperimentError::UnknownPreset(name.to_string()))?;
    ExperimentConfig::from_toml(text)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Write a `# generated_at_unix=…` first line into every CSV.
    pub timestamp: bool,
    pub quiet: bool,
    /// Seeds processed concurrently.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out_dir: PathBuf::from("results"),
            timestamp: true,
            quiet: false,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
}

struct CsvFile {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvFile {
    fn create(path: PathBuf, preamble: &[String], header: &str, timestamp: bool) -> Result<Self, ExperimentError> {
        let file = File::create(&path).map_err(|source| ExperimentError::Io {
            path: path.clone(),
            source,
        })?;
        let mut csv = CsvFile {
            path,
            out: BufWriter::new(file),
        };
        if timestamp {
            let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            csv.line(&format!("# generated_at_unix={now}"))?;
        }
        for p in preamble {
            csv.line(&format!("# {p}"))?;
        }
        csv.line(header)?;
        Ok(csv)
    }

    fn line(&mut self, text: &str) -> Result<(), ExperimentError> {
        writeln!(self.out, "{text}").map_err(|source| ExperimentError::Io {
            path: self.path.clone(),
            source,
        })
    }

    /// Writes a row and flushes, so partial results survive interruption.
    fn row(&mut self, text: &str) -> Result<(), ExperimentError> {
        self.line(text)?;
        self.out.flush().map_err(|source| ExperimentError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

fn runtime(seed: u64) -> impl Fn(&dyn std::fmt::Display) -> ExperimentError {
    move |e| ExperimentError::Runtime {
        seed,
        message: e.to_string(),
    }
}

/// Applies `f` to every seed on up to `jobs` threads; results keep seed order.
fn parallel_map<T, F>(seeds: &[u64], jobs: usize, f: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(u64) -> Result<T, ExperimentError> + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T, ExperimentError>>>> = Mutex::new((0..seeds.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, seeds.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let r = f(seeds[i]);
                slots.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every seed processed"))
        .collect()
}

pub fn graph_label(m: &GraphModel) -> String {
    match m {
        GraphModel::ErGnp { p } => format!("er_gnp:p={p}"),
        GraphModel::ErMeanDegree { mean_degree } => format!("er_mean_degree:k={mean_degree}"),
        GraphModel::KRegular { k } => format!("k_regular:k={k}"),
        GraphModel::BarabasiAlbert { m } => format!("barabasi_albert:m={m}"),
        GraphModel::ConfigPowerlaw { gamma, k_min } => format!("config_powerlaw:gamma={gamma}:k_min={k_min}"),
        GraphModel::TorusLattice { dim, side } => format!("torus_lattice:dim={dim}:side={side}"),
        other => other.family_name().to_string(),
    }
}

pub fn gain_label(g: &GainMode) -> String {
    let size = |s: &federation::SizeEstimate| {
        let src = s.gossip_samples.map_or("n".to_string(), |m| format!("gossip{m}"));
        if s.scale == 1.0 {
            src
        } else {
            format!("{src}*{}", s.scale)
        }
    };
    match g {
        GainMode::None => "none".into(),
        GainMode::Fixed { value } => format!("fixed:{value}"),
        GainMode::Exact => "exact".into(),
        GainMode::DegreeSample { sample_size, size: s } => format!("degree_sample:{sample_size}:{}", size(s)),
        GainMode::Family {
            family,
            exponent,
            size: s,
        } => match exponent {
            Some(a) => format!("family:{}:alpha={a}:{}", family.name(), size(s)),
            None => format!("family:{}:{}", family.name(), size(s)),
        },
    }
}

pub fn dropout_label(d: &Dropout) -> String {
    match d {
        Dropout::None => "none".into(),
        Dropout::Link { p } => format!("link:{p}"),
        Dropout::Node { p } => format!("node:{p}"),
    }
}

fn connected_graph(model: &GraphModel, n: usize, seed: u64) -> Result<Graph, ExperimentError> {
    generate_connected(model, n, seed, 1000)
        .map(|(g, _)| g)
        .map_err(|e| runtime(seed)(&e))
}

/// Validates, runs every seed and writes CSVs into `opts.out_dir`.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, ExperimentError> {
    let diagnostics = validate(config);
    if !diagnostics.is_empty() {
        return Err(ExperimentError::Config(diagnostics));
    }
    fs::create_dir_all(&opts.out_dir).map_err(|source| ExperimentError::Io {
        path: opts.out_dir.clone(),
        source,
    })?;
    let ctx = Ctx { config, opts };
    match &config.kind {
        ExperimentKind::VsteadyScaling(c) => ctx.vsteady(c),
        ExperimentKind::DiffusionTrace(c) => ctx.diffusion(c),
        ExperimentKind::MixingScan(c) => ctx.mixing(c),
        ExperimentKind::FlRun(c) => ctx.fl_run(c),
        ExperimentKind::FlSweep(c) => ctx.fl_sweep(c),
        ExperimentKind::BaselineCentral(c) => ctx.baseline(c),
    }
}

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    opts: &'a RunOptions,
}

struct Loaded {
    train: Dataset,
    test: Dataset,
}

fn load_data(fl: &FlSetup) -> Result<Loaded, ExperimentError> {
    let (train, test) = data::load_mnist_dir(&fl.dataset_path()).map_err(|e| ExperimentError::Runtime {
        seed: 0,
        message: e.to_string(),
    })?;
    let test = match fl.test_items {
        Some(k) => test.first(k),
        None => test,
    };
    Ok(Loaded { train, test })
}

impl Ctx<'_> {
    fn seed_csv(&self, seed: u64, header: &str) -> Result<CsvFile, ExperimentError> {
        let path = self.opts.out_dir.join(format!("{}_seed{seed}.csv", self.config.name));
        let preamble = [format!(
            "experiment={} kind={} seed={seed}",
            self.config.name,
            self.config.kind.name()
        )];
        CsvFile::create(path, &preamble, header, self.opts.timestamp)
    }

    fn summary_csv(&self, suffix: &str, header: &str) -> Result<CsvFile, ExperimentError> {
        let path = self.opts.out_dir.join(format!("{}_{suffix}.csv", self.config.name));
        let preamble = [format!(
            "experiment={} kind={} seeds={:?}",
            self.config.name,
            self.config.kind.name(),
            self.config.seeds
        )];
        CsvFile::create(path, &preamble, header, self.opts.timestamp)
    }

    fn seed_files(&self) -> Vec<PathBuf> {
        self.config
            .seeds
            .iter()
            .map(|s| self.opts.out_dir.join(format!("{}_seed{s}.csv", self.config.name)))
            .collect()
    }

    fn progress(&self, msg: impl std::fmt::Display) {
        if !self.opts.quiet {
            eprintln!("[{}] {msg}", self.config.name);
        }
    }

    fn vsteady(&self, c: &VsteadyScaling) -> Result<RunReport, ExperimentError> {
        let method = c
            .empirical_tol
            .map_or(MixingMethod::Spectral, |tol| MixingMethod::Empirical { tol });
        let per_seed = parallel_map(&self.config.seeds, self.opts.jobs, |seed| {
            let mut csv = self.seed_csv(seed, "graph_family,n,seed,norm,lambda2,empirical_rounds")?;
            let mut out = Vec::new();
            for family in &c.families {
                for &n in &c.sizes {
                    let g = connected_graph(family, n, seed)?;
                    let m = MarkovMatrix::from_graph(&g);
                    let ss = spectral::steady_state_exact(&m, spectral::DEFAULT_TOLERANCE, spectral::DEFAULT_MAX_ITER)
                        .map_err(|e| runtime(seed)(&e))?;
                    let mix = spectral::mixing_estimate(&m, method).map_err(|e| runtime(seed)(&e))?;
                    let label = graph_label(family);
                    let emp = mix.empirical_rounds.map_or(String::new(), |r| r.to_string());
                    csv.row(&format!(
                        "{label},{n},{seed},{},{},{emp}",
                        ss.norm, mix.second_eigenvalue_modulus
                    ))?;
                    out.push((label, n, ss.norm));
                }
            }
            self.progress(format_args!("seed {seed} done"));
            Ok(out)
        })?;

        let mut files = self.seed_files();
        let mut summary = self.summary_csv("summary", "graph_family,n,norm_mean,norm_ci_low,norm_ci_high")?;
        let mut exps = self.summary_csv("exponents", "graph_family,alpha,alpha_through_origin")?;
        for family in &c.families {
            let label = graph_label(family);
            let mut points = Vec::new();
            for &n in &c.sizes {
                let norms: Vec<f64> = per_seed
                    .iter()
                    .flatten()
                    .filter(|(l, m, _)| *l == label && *m == n)
                    .map(|t| t.2)
                    .collect();
                let ci = stats::bootstrap_mean_ci(&norms, 0.95, 2000, 0).expect("at least one seed");
                summary.row(&format!("{label},{n},{},{},{}", ci.estimate, ci.lower, ci.upper))?;
                points.push((n as f64, ci.estimate));
            }
            let fmt = |r: Result<f64, _>| r.map_or(String::new(), |a: f64| a.to_string());
            exps.row(&format!(
                "{label},{},{}",
                fmt(spectral::fit_scaling_exponent(&points)),
                fmt(spectral::fit_pure_power_exponent(&points))
            ))?;
        }
        files.push(summary.path);
        files.push(exps.path);
        Ok(RunReport { files })
    }

    fn diffusion(&self, c: &DiffusionTrace) -> Result<RunReport, ExperimentError> {
        let traces = parallel_map(&self.config.seeds, self.opts.jobs, |seed| {
            let g = connected_graph(&c.graph.model, c.graph.n, seed)?;
            let trace = diffusion::run_diffusion(&g, c.params, c.sigma_init, c.sigma_noise, c.rounds, seed)
                .map_err(|e| runtime(seed)(&e))?;
            let mut csv = self.seed_csv(seed, "round,sigma_ap,sigma_an")?;
            for (t, (ap, an)) in trace.sigma_ap.iter().zip(&trace.sigma_an).enumerate() {
                csv.row(&format!("{t},{ap},{an}"))?;
            }
            Ok(trace
                .sigma_ap
                .iter()
                .zip(&trace.sigma_an)
                .map(|(&a, &b)| vec![a, b])
                .collect::<Vec<_>>())
        })?;
        let mut files = self.seed_files();
        files.push(self.trajectory_summary(&["sigma_ap", "sigma_an"], &traces)?);
        Ok(RunReport { files })
    }

    fn mixing(&self, c: &MixingScan) -> Result<RunReport, ExperimentError> {
        let per_seed = parallel_map(&self.config.seeds, self.opts.jobs, |seed| {
            let mut csv = self.seed_csv(seed, "graph_family,n,seed,lambda2,relaxation_time,stabilisation_round")?;
            let mut out = Vec::new();
            for family in &c.families {
                for &n in &c.sizes {
                    let g = connected_graph(family, n, seed)?;
                    let mix = spectral::mixing_estimate(&MarkovMatrix::from_graph(&g), MixingMethod::Spectral)
                        .map_err(|e| runtime(seed)(&e))?;
                    let trace = diffusion::run_diffusion(&g, c.params, c.sigma_init, c.sigma_noise, c.rounds, seed)
                        .map_err(|e| runtime(seed)(&e))?;
                    let stab = diffusion::stabilisation_round(&trace.sigma_an, c.eps, c.window);
                    let label = graph_label(family);
                    csv.row(&format!(
                        "{label},{n},{seed},{},{},{}",
                        mix.second_eigenvalue_modulus,
                        mix.relaxation_time,
                        stab.map_or(String::new(), |s| s.to_string())
                    ))?;
                    out.push((label, n, stab));
                }
            }
            self.progress(format_args!("seed {seed} done"));
            Ok(out)
        })?;
        let mut files = self.seed_files();
        let mut summary = self.summary_csv("summary", "graph_family,n,stabilisation_median,stabilised_seeds")?;
        for family in &c.families {
            let label = graph_label(family);
            for &n in &c.sizes {
                let rounds: Vec<f64> = per_seed
                    .iter()
                    .flatten()
                    .filter(|(l, m, _)| *l == label && *m == n)
                    .filter_map(|t| t.2.map(|r| r as f64))
                    .collect();
                let med = stats::median(&rounds).map_or(String::new(), |m| m.to_string());
                summary.row(&format!("{label},{n},{med},{}", rounds.len()))?;
            }
        }
        files.push(summary.path);
        Ok(RunReport { files })
    }

    /// One federated trajectory; rows are streamed to `csv` with `prefix`.
    #[allow(clippy::too_many_arguments)]
    fn trajectory(
        &self,
        data: &Loaded,
        graph: Graph,
        fl: &FlSetup,
        gain: GainMode,
        dropout: Dropout,
        seed: u64,
        csv: &mut CsvFile,
        prefix: &str,
    ) -> Result<Vec<RoundMetrics>, ExperimentError> {
        let err = runtime(seed);
        let spec = fl.spec().map_err(|e| err(&e))?;
        let part = federation::partition(
            &data.train.labels,
            data.train.classes,
            graph.n(),
            fl.items_per_node,
            fl.partition,
            seed,
        )
        .map_err(|e| err(&e))?;
        let gain_value = gain.resolve(&graph, seed).map_err(|e| err(&e))?;
        let training = federation::TrainingConfig { dropout, ..fl.training };
        let mut state = FederationState::new(graph, &spec, &data.train, &data.test, &part, gain_value, training, seed)
            .map_err(|e| err(&e))?;
        let mut out = vec![state.snapshot_metrics().map_err(|e| err(&e))?];
        csv.row(&format!("{prefix}{}", out[0].csv_row()))?;
        for _ in 0..fl.rounds {
            let m = state.run_round().map_err(|e| err(&e))?;
            csv.row(&format!("{prefix}{}", m.csv_row()))?;
            out.push(m);
            if m.round % 50 == 0 {
                self.progress(format_args!(
                    "seed {seed} {prefix}round {} loss {:.4}",
                    m.round, m.mean_test_loss
                ));
            }
            if fl.stop_below.is_some_and(|t| m.mean_test_loss <= t) {
                break;
            }
        }
        Ok(out)
    }

    fn fl_run(&self, c: &FlRun) -> Result<RunReport, ExperimentError> {
        let data = load_data(&c.fl)?;
        let runs = parallel_map(&self.config.seeds, self.opts.jobs, |seed| {
            let g = connected_graph(&c.graph.model, c.graph.n, seed)?;
            let mut csv = self.seed_csv(seed, RoundMetrics::CSV_HEADER)?;
            let ms = self.trajectory(&data, g, &c.fl, c.fl.gain, c.fl.training.dropout, seed, &mut csv, "")?;
            Ok(metric_rows(&ms))
        })?;
        let mut files = self.seed_files();
        files.push(self.trajectory_summary(&METRIC_COLUMNS, &runs)?);
        Ok(RunReport { files })
    }

    fn fl_sweep(&self, c: &FlSweep) -> Result<RunReport, ExperimentError> {
        let data = load_data(&c.fl)?;
        let header = format!("label,graph_family,n,gain,dropout,{}", RoundMetrics::CSV_HEADER);
        let runs = parallel_map(&self.config.seeds, self.opts.jobs, |seed| {
            let mut csv = self.seed_csv(seed, &header)?;
            let mut out = Vec::new();
            for gs in &c.graphs {
                for gain in &c.gains {
                    for dropout in &c.dropouts {
                        let (gl, dl) = (gain_label(gain), dropout_label(dropout));
                        let fam = graph_label(&gs.model);
                        let label = format!("{fam}/n={}/gain={gl}/dropout={dl}", gs.n);
                        let prefix = format!("{label},{fam},{},{gl},{dl},", gs.n);
                        let g = connected_graph(&gs.model, gs.n, seed)?;
                        let ms = self.trajectory(&data, g, &c.fl, *gain, *dropout, seed, &mut csv, &prefix)?;
                        out.push((label, ms));
                    }
                }
            }
            Ok(out)
        })?;
        let mut files = self.seed_files();
        let mut summary = self.summary_csv(
            "summary",
            "label,threshold,median_rounds,reached_seeds,seeds,final_loss_median",
        )?;
        let labels: Vec<String> = runs[0].iter().map(|(l, _)| l.clone()).collect();
        for (k, label) in labels.iter().enumerate() {
            let finals: Vec<f64> = runs
                .iter()
                .map(|r| r[k].1.last().expect("round 0").mean_test_loss)
                .collect();
            let final_med = stats::median(&finals).expect("seeds non-empty");
            for &t in &c.thresholds {
                let hit: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| federation::rounds_to_threshold(&r[k].1, t).map(|x| x as f64))
                    .collect();
                let med = stats::median(&hit).map_or(String::new(), |m| m.to_string());
                summary.row(&format!("{label},{t},{med},{},{},{final_med}", hit.len(), runs.len()))?;
            }
        }
        files.push(summary.path);
        Ok(RunReport { files })
    }

    fn baseline(&self, c: &BaselineCentral) -> Result<RunReport, ExperimentError> {
        let data = load_data(&c.fl)?;
        let runs = parallel_map(&self.config.seeds, self.opts.jobs, |seed| {
            let err = runtime(seed);
            let part = federation::partition(
                &data.train.labels,
                data.train.classes,
                c.nodes,
                c.fl.items_per_node,
                c.fl.partition,
                seed,
            )
            .map_err(|e| err(&e))?;
            let spec = c.fl.spec().map_err(|e| err(&e))?;
            let ms = federation::central_baseline(
                &spec,
                &data.train,
                &part.union(),
                &data.test,
                c.fl.training,
                c.fl.rounds,
                seed,
            )
            .map_err(|e| err(&e))?;
            let mut csv = self.seed_csv(seed, RoundMetrics::CSV_HEADER)?;
            for m in &ms {
                csv.row(&m.csv_row())?;
            }
            Ok(metric_rows(&ms))
        })?;
        let mut files = self.seed_files();
        files.push(self.trajectory_summary(&METRIC_COLUMNS, &runs)?);
        Ok(RunReport { files })
    }

    /// Per-round mean and 95% bootstrap interval of each column across seeds
    /// (seeds that stopped early drop out of later rounds).
    fn trajectory_summary(&self, columns: &[&str], runs: &[Vec<Vec<f64>>]) -> Result<PathBuf, ExperimentError> {
        let mut header = String::from("round");
        for c in columns {
            header.push_str(&format!(",{c}_mean,{c}_ci_low,{c}_ci_high"));
        }
        header.push_str(",seeds");
        let mut csv = self.summary_csv("summary", &header)?;
        let len = runs.iter().map(Vec::len).max().unwrap_or(0);
        for r in 0..len {
            let present: Vec<&Vec<f64>> = runs.iter().filter_map(|run| run.get(r)).collect();
            let mut line = r.to_string();
            for k in 0..columns.len() {
                let xs: Vec<f64> = present.iter().map(|row| row[k]).collect();
                let ci = stats::bootstrap_mean_ci(&xs, 0.95, 1000, r as u64).expect("non-empty");
                line.push_str(&format!(",{},{},{}", ci.estimate, ci.lower, ci.upper));
            }
            line.push_str(&format!(",{}", present.len()));
            csv.row(&line)?;
        }
        Ok(csv.path)
    }
}

const METRIC_COLUMNS: [&str; 7] = [
    "mean_test_loss",
    "mean_test_accuracy",
    "sigma_ap",
    "sigma_an",
    "mean_delta_train",
    "mean_delta_agg",
    "mean_cosine",
];

fn metric_rows(ms: &[RoundMetrics]) -> Vec<Vec<f64>> {
    ms.iter()
        .map(|m| {
            vec![
                m.mean_test_loss,
                m.mean_test_accuracy,
                m.sigma_ap,
                m.sigma_an,
                m.mean_delta_train,
                m.mean_delta_agg,
                m.mean_cosine,
            ]
        })
        .collect()
}

/// Reads a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_toml(&text)
}
