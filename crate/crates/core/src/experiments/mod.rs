//! Experiment specs, seed and sweep fan-out, and CSV emission.
//!
//! Every `(sweep point, seed)` pair is an independent job with its own
//! environment, agent and solver state. Jobs run on a worker pool whose size
//! is capped by `WCSEE_THREADS`; results are merged in `(sweep value, seed)`
//! order before anything is written, so the output bytes do not depend on
//! scheduling.
//!
//! Random streams per seed: `child(0)` drives the environment (episode `e`
//! draws from `child(0).child(e)`), `child(1)` initializes networks,
//! `child(2)` drives exploration and replay and `child(3)` the random-policy
//! baseline. The SCA benchmark solves the episode-0 draw, so a seed gives the
//! same channel to every method and every sweep point.

mod config;

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::Rng;
use rayon::prelude::*;

pub use config::{load_config, parse_config, Config, Method, Preset};

use crate::agents::{evaluate_policy, train, Agent, DdpgAgent, LearningCurve, SacAgent};
use crate::channels::{dbm_to_watts, ChannelDraw};
use crate::env::{reward_of, ControlDecision, TrajectoryLog, WcseeEnv};
use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamTag};
use crate::sca::{bcd_outer, max_monotonicity_violation, write_trace};

/// First episode index used for held-out evaluation.
pub const HELD_OUT_EPISODE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    TrainSac,
    TrainDdpg,
    ScaBenchmark,
    Eval,
    Sweep,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train-sac" => Ok(Self::TrainSac),
            "train-ddpg" => Ok(Self::TrainDdpg),
            "sca-benchmark" => Ok(Self::ScaBenchmark),
            "eval" => Ok(Self::Eval),
            "sweep" => Ok(Self::Sweep),
            _ => Err(Error::Validation(format!(
                "unknown mode `{s}` (train-sac, train-ddpg, sca-benchmark, eval or sweep)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::TrainSac => "train-sac",
            Self::TrainDdpg => "train-ddpg",
            Self::ScaBenchmark => "sca-benchmark",
            Self::Eval => "eval",
            Self::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Transmit budget in dBm.
    PMaxDbm,
    M,
    Nu,
    Batch,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "p_max" | "p_max_dbm" | "pmax" => Ok(Self::PMaxDbm),
            "m" => Ok(Self::M),
            "nu" | "ν" => Ok(Self::Nu),
            "batch" | "batch_size" | "b" => Ok(Self::Batch),
            _ => Err(Error::Validation(format!("unknown sweep axis `{s}` (p_max, m, nu or batch)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::PMaxDbm => "p_max_dbm",
            Self::M => "m",
            Self::Nu => "nu",
            Self::Batch => "batch",
        }
    }

    fn integral(&self) -> bool {
        matches!(self, Self::M | Self::Batch)
    }

    fn apply(&self, c: &mut Config, v: f64) {
        match self {
            Self::PMaxDbm => c.scenario.p_max = dbm_to_watts(v),
            Self::M => c.scenario.m = v as usize,
            Self::Nu => c.scenario.nu = v,
            Self::Batch => c.schedule.batch_size = v as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    /// Sorted ascending, no duplicates.
    pub values: Vec<f64>,
}

impl Sweep {
    /// Parses `axis=v1,v2,...`.
    pub fn parse(arg: &str) -> Result<Self> {
        let (axis, vals) = arg
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("sweep must look like `axis=v1,v2`, got `{arg}`")))?;
        let axis = SweepAxis::parse(axis.trim())?;
        let mut values = Vec::new();
        for t in vals.split(',') {
            let t = t.trim();
            let v: f64 = t
                .parse()
                .map_err(|_| Error::Validation(format!("sweep value `{t}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::Validation(format!("sweep value `{t}` is not finite")));
            }
            if axis.integral() && (v < 1.0 || v.fract() != 0.0) {
                return Err(Error::Validation(format!("{} sweep needs positive integers, got `{t}`", axis.name())));
            }
            values.push(v);
        }
        values.sort_by(f64::total_cmp);
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("duplicate sweep value".into()));
        }
        Ok(Self { axis, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub config: Config,
    /// Sorted ascending, no duplicates.
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub sweep: Option<Sweep>,
}

/// One sweep point with its fully resolved configuration.
#[derive(Debug, Clone)]
struct Point {
    value: Option<f64>,
    config: Config,
}

impl ExperimentSpec {
    pub fn new(mode: Mode, config: Config, mut seeds: Vec<u64>, out: PathBuf, sweep: Option<Sweep>) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::Validation("at least one seed is required".into()));
        }
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("duplicate seed".into()));
        }
        if mode == Mode::Sweep && sweep.is_none() {
            return Err(Error::Validation("sweep mode needs --sweep axis=v1,v2,...".into()));
        }
        let spec = Self {
            mode,
            config,
            seeds,
            out,
            sweep,
        };
        let method = spec.method();
        if mode == Mode::Eval && method == Method::Sca {
            return Err(Error::Validation("eval mode needs method = sac or ddpg".into()));
        }
        if method == Method::Sca {
            if let Some(s) = &spec.sweep {
                if matches!(s.axis, SweepAxis::Nu | SweepAxis::Batch) {
                    return Err(Error::Validation(format!(
                        "the SCA benchmark has no {} axis (perfect CSI, no learning)",
                        s.axis.name()
                    )));
                }
            }
            if spec.config.scenario.nu != 0.0 {
                return Err(Error::Validation("the SCA benchmark assumes perfect CSI (nu = 0)".into()));
            }
        }
        spec.points()?;
        Ok(spec)
    }

    pub fn method(&self) -> Method {
        match self.mode {
            Mode::TrainSac => Method::Sac,
            Mode::TrainDdpg => Method::Ddpg,
            Mode::ScaBenchmark => Method::Sca,
            Mode::Eval | Mode::Sweep => self.config.method,
        }
    }

    fn points(&self) -> Result<Vec<Point>> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![Point {
                value: None,
                config: self.config.clone(),
            }]);
        };
        sweep
            .values
            .iter()
            .map(|&v| {
                let mut config = self.config.clone();
                sweep.axis.apply(&mut config, v);
                config
                    .validate()
                    .map_err(|e| Error::Validation(format!("{} = {v}: {e}", sweep.axis.name())))?;
                Ok(Point { value: Some(v), config })
            })
            .collect()
    }
}

/// Result of one `(sweep point, seed)` job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobOutcome {
    pub sweep_value: Option<f64>,
    pub seed: u64,
    pub metrics: Vec<(&'static str, f64)>,
    pub curve: Option<LearningCurve>,
    files: Vec<(String, Vec<u8>)>,
}

impl JobOutcome {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub sweep_value: Option<f64>,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub method: Method,
    pub axis: Option<SweepAxis>,
    /// In `(sweep value, seed)` order.
    pub jobs: Vec<JobOutcome>,
    pub aggregate: Vec<AggregateRow>,
    /// Paths written, relative to the output directory.
    pub files: Vec<String>,
}

/// Mean and sample standard deviation (`n - 1` denominator, zero for a
/// single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Worker count: `WCSEE_THREADS` if set, else the available parallelism.
pub fn thread_cap() -> Result<usize> {
    match std::env::var("WCSEE_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Validation(format!("WCSEE_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

fn stem(method: Method, point: Option<usize>, seed: u64) -> String {
    match point {
        Some(i) => format!("{}_pt{i}_seed{seed}", method.name()),
        None => format!("{}_seed{seed}", method.name()),
    }
}

fn sca_job(c: &Config, seed: u64, stem: &str) -> Result<JobOutcome> {
    let sc = &c.scenario;
    let draw = ChannelDraw::sample(sc, &RngStream::new(seed).child(0).child(0))?;
    let r = bcd_outer(sc, &draw, None, &c.sca)?;
    let real = draw.realize(sc, r.q, &r.s);
    let (wcsee, ev) = reward_of(sc, &real, &r.p)?;
    let mut trace = Vec::new();
    write_trace(&r.trace, &mut trace)?;
    Ok(JobOutcome {
        sweep_value: None,
        seed,
        metrics: vec![
            ("wcsee", wcsee),
            ("r_sec", ev.as_ref().map_or(0.0, |e| e.rates.min)),
            ("power_sum", r.p.iter().sum()),
            ("eh_ok", f64::from(u8::from(ev.as_ref().is_some_and(|e| e.eh_ok)))),
            ("outer_iters", r.eta.len() as f64),
            ("kept_blocks", r.kept.len() as f64),
            ("monotonicity_violation", max_monotonicity_violation(&r.trace)),
        ],
        curve: None,
        files: vec![(format!("{stem}_trace.csv"), trace)],
    })
}

/// Mean reward of uniformly random actions over one episode.
fn random_policy_reward(env: &mut WcseeEnv, episode: u64, rng: &mut impl Rng) -> Result<f64> {
    env.reset(episode);
    let h = env.options().horizon;
    let mut sum = 0.0;
    for _ in 0..h {
        let a: Vec<f64> = (0..env.action_dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        sum += env.step(&a)?.0;
    }
    Ok(sum / h as f64)
}

/// Reward of equal power split, zero phases and the UAV at its start. The
/// decision does not move the channel, so every step of an episode earns it.
fn start_decision_reward(env: &mut WcseeEnv, episode: u64) -> Result<f64> {
    env.reset(episode);
    let cfg = env.config();
    let d = ControlDecision {
        p: vec![cfg.p_max / cfg.k as f64; cfg.k],
        theta: vec![0.0; cfg.m],
        q: cfg.uav_start,
    };
    Ok(env.evaluate_decision(&d)?.0.reward)
}

fn drl_job<A: Agent>(
    c: &Config,
    env: &mut WcseeEnv,
    agent: &mut A,
    seed: u64,
    stem: &str,
    baselines: bool,
) -> Result<JobOutcome> {
    let root = RngStream::new(seed);
    let curve = train::<A, Vec<u8>>(env, agent, &c.schedule, &root.child(2), None::<&mut TrajectoryLog<Vec<u8>>>)?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    let mut files = vec![(format!("{stem}_curve.csv"), buf)];
    let episodes: Vec<u64> = (0..c.eval_episodes as u64).map(|i| HELD_OUT_EPISODE + i).collect();
    let mut metrics = vec![("final_reward", curve.tail_mean(c.tail_episodes))];
    if baselines {
        let mut rng = root.child(3).substream(StreamTag::Misc, 0);
        let mut csv = String::from("episode,policy_reward,best_step_reward,random_reward,start_reward\n");
        let (mut pol, mut best, mut rnd, mut start) = (0.0, 0.0f64, 0.0, 0.0);
        for &ep in &episodes {
            let e = evaluate_policy(env, agent, &[ep])?;
            let r = random_policy_reward(env, ep, &mut rng)?;
            let s = start_decision_reward(env, ep)?;
            writeln!(csv, "{ep},{:e},{:e},{:e},{:e}", e.mean_reward, e.best_reward, r, s).expect("string write");
            pol += e.mean_reward;
            best = best.max(e.best_reward);
            rnd += r;
            start += s;
        }
        let n = episodes.len() as f64;
        metrics.extend([
            ("eval_reward", pol / n),
            ("best_reward", best),
            ("random_reward", rnd / n),
            ("start_reward", start / n),
        ]);
        files.push((format!("{stem}_eval.csv"), csv.into_bytes()));
    } else {
        let e = evaluate_policy(env, agent, &episodes)?;
        metrics.extend([("eval_reward", e.mean_reward), ("best_reward", e.best_reward)]);
    }
    metrics.push(("temperature", agent.temperature()));
    Ok(JobOutcome {
        sweep_value: None,
        seed,
        metrics,
        curve: Some(curve),
        files,
    })
}

fn run_job(mode: Mode, method: Method, c: &Config, seed: u64, stem: &str) -> Result<JobOutcome> {
    if method == Method::Sca {
        return sca_job(c, seed, stem);
    }
    let root = RngStream::new(seed);
    let mut env = WcseeEnv::new(c.scenario.clone(), c.env, root.child(0))?;
    let (s_dim, a_dim) = (env.state_dim(), env.action_dim());
    let baselines = mode == Mode::Eval;
    match method {
        Method::Sac => {
            let mut agent = SacAgent::new(s_dim, a_dim, c.sac.clone(), &root.child(1))?;
            drl_job(c, &mut env, &mut agent, seed, stem, baselines)
        }
        _ => {
            let mut agent = DdpgAgent::new(s_dim, a_dim, c.ddpg.clone(), &root.child(1))?;
            drl_job(c, &mut env, &mut agent, seed, stem, baselines)
        }
    }
}

const SUMMARY_HEADER: &str = "method,sweep_axis,sweep_value,seed,metric,value";
const AGGREGATE_HEADER: &str = "method,sweep_axis,sweep_value,metric,n,mean,std";
const CURVES_HEADER: &str = "method,sweep_axis,sweep_value,episode,n,mean_reward_mean,mean_reward_std";

fn schema(method: Method) -> String {
    let mut s = String::from(
        "# Output files. Numbers use the shortest exact decimal form; units are SI.\n\
         # sweep_axis is `none` and sweep_value empty for runs without a sweep.\n\
         # Per-seed files are named <method>_seed<s>_* or <method>_pt<i>_seed<s>_*, where\n\
         # <i> indexes the ascending sweep values.\n\n",
    );
    writeln!(s, "<stem>_summary.csv: {SUMMARY_HEADER}").unwrap();
    writeln!(s, "aggregate.csv: {AGGREGATE_HEADER}").unwrap();
    s.push_str("  mean and std over seeds of each summary metric; std uses the n-1 denominator (0 when n = 1)\n");
    match method {
        Method::Sca => {
            writeln!(s, "<stem>_trace.csv: {}", crate::sca::TRACE_HEADER).unwrap();
            s.push_str(
                "  objective: power block zeta/P (bit/J/Hz), ris block zeta + C|s|^2, uav block min rate (bit/s/Hz)\n\
                 \x20 lambda: Dinkelbach parameter (power) or penalty weight C (ris); eh_slack: harvested RF minus requirement (W)\n\
                 metrics: wcsee (bit/J/Hz, zero when the EH requirement fails), r_sec (bit/s/Hz), power_sum (W),\n\
                 \x20 eh_ok (0/1), outer_iters, kept_blocks (block solves that kept the previous iterate),\n\
                 \x20 monotonicity_violation (largest relative decrease inside one block run)\n",
            );
        }
        _ => {
            writeln!(s, "<stem>_curve.csv: {}", LearningCurve::HEADER).unwrap();
            s.push_str(
                "  mean_reward: per-step WCSEE reward averaged over the episode (bit/J/Hz); beta: SAC temperature or\n\
                 \x20 DDPG noise scale; losses are averages over the episode's gradient phases (NaN before warmup ends)\n",
            );
            writeln!(s, "curves_aggregate.csv: {CURVES_HEADER}").unwrap();
            s.push_str(
                "<stem>_eval.csv (eval mode): episode,policy_reward,best_step_reward,random_reward,start_reward\n\
                 \x20 greedy policy, uniformly random actions and the start decision on held-out episodes\n\
                 metrics: final_reward (mean over the last tail_episodes training episodes), eval_reward (greedy,\n\
                 \x20 held-out episodes), best_reward (best single greedy step), temperature; eval mode adds\n\
                 \x20 random_reward and start_reward\n",
            );
        }
    }
    s
}

/// Runs every job, then writes per-seed CSVs, aggregates and the schema.
pub fn run(spec: &ExperimentSpec) -> Result<RunReport> {
    let method = spec.method();
    let points = spec.points()?;
    let axis = spec.sweep.as_ref().map(|s| s.axis);
    let mut jobs = Vec::new();
    for (i, p) in points.iter().enumerate() {
        for &seed in &spec.seeds {
            jobs.push((i, p, seed));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap()?)
        .build()
        .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
    let results: Vec<Result<JobOutcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, p, seed)| {
                let st = stem(method, axis.map(|_| i), seed);
                run_job(spec.mode, method, &p.config, seed, &st)
                    .map(|mut o| {
                        o.sweep_value = p.value;
                        o
                    })
                    .map_err(|e| Error::Job {
                        label: match p.value {
                            Some(v) => format!("{} = {v}, seed {seed}", axis.map_or("", |a| a.name())),
                            None => format!("seed {seed}"),
                        },
                        source: Box::new(e),
                    })
            })
            .collect()
    });
    let jobs: Vec<JobOutcome> = results.into_iter().collect::<Result<_>>()?;

    let axis_name = axis.map_or("none", |a| a.name());
    let mut out_files: Vec<(String, Vec<u8>)> = Vec::new();
    for (k, j) in jobs.iter().enumerate() {
        let point = axis.map(|_| k / spec.seeds.len());
        let mut s = format!("{SUMMARY_HEADER}\n");
        for (m, v) in &j.metrics {
            writeln!(s, "{},{axis_name},{},{},{m},{v:e}", method.name(), fmt_value(j.sweep_value), j.seed).unwrap();
        }
        out_files.push((format!("{}_summary.csv", stem(method, point, j.seed)), s.into_bytes()));
        out_files.extend(j.files.iter().cloned());
    }

    let mut aggregate = Vec::new();
    let mut agg = format!("{AGGREGATE_HEADER}\n");
    let mut curves = format!("{CURVES_HEADER}\n");
    for group in jobs.chunks(spec.seeds.len()) {
        let value = group[0].sweep_value;
        for (m, _) in &group[0].metrics {
            let xs: Vec<f64> = group.iter().map(|j| j.metric(m).expect("same metrics per method")).collect();
            let (mean, std) = mean_std(&xs);
            writeln!(agg, "{},{axis_name},{},{m},{},{mean:e},{std:e}", method.name(), fmt_value(value), xs.len()).unwrap();
            aggregate.push(AggregateRow {
                sweep_value: value,
                metric: m.to_string(),
                n: xs.len(),
                mean,
                std,
            });
        }
        if group[0].curve.is_some() {
            let n_ep = group[0].curve.as_ref().map_or(0, |c| c.records.len());
            for e in 0..n_ep {
                let xs: Vec<f64> = group
                    .iter()
                    .map(|j| j.curve.as_ref().expect("curve per job").records[e].mean_reward)
                    .collect();
                let (mean, std) = mean_std(&xs);
                writeln!(curves, "{},{axis_name},{},{e},{},{mean:e},{std:e}", method.name(), fmt_value(value), xs.len()).unwrap();
            }
        }
    }
    out_files.push(("aggregate.csv".into(), agg.into_bytes()));
    if method != Method::Sca {
        out_files.push(("curves_aggregate.csv".into(), curves.into_bytes()));
    }
    out_files.push(("schema.txt".into(), schema(method).into_bytes()));

    std::fs::create_dir_all(&spec.out).map_err(|e| Error::Io(format!("{}: {e}", spec.out.display())))?;
    for (name, bytes) in &out_files {
        let path = spec.out.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(RunReport {
        method,
        axis,
        jobs,
        aggregate,
        files: out_files.into_iter().map(|(n, _)| n).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        let s = Sweep::parse("P_max=10,0,5").unwrap();
        assert_eq!(s.axis, SweepAxis::PMaxDbm);
        assert_eq!(s.values, vec![0.0, 5.0, 10.0]);
        assert!(Sweep::parse("m=2.5").is_err());
        assert!(Sweep::parse("batch=0").is_err());
        assert!(Sweep::parse("depth=1").is_err());
        assert!(Sweep::parse("nu=0.1,0.1").is_err());
        assert_eq!(Sweep::parse("ν=0.01").unwrap().axis, SweepAxis::Nu);
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn spec_validation() {
        let c = Config::preset(Preset::Tiny);
        let out = PathBuf::from("unused");
        assert!(ExperimentSpec::new(Mode::TrainSac, c.clone(), vec![], out.clone(), None).is_err());
        assert!(ExperimentSpec::new(Mode::TrainSac, c.clone(), vec![1, 1], out.clone(), None).is_err());
        assert!(ExperimentSpec::new(Mode::Sweep, c.clone(), vec![1], out.clone(), None).is_err());
        let nu = Sweep::parse("nu=0.01,0.1").ok();
        assert!(ExperimentSpec::new(Mode::ScaBenchmark, c.clone(), vec![1], out.clone(), nu.clone()).is_err());
        assert!(ExperimentSpec::new(Mode::TrainSac, c.clone(), vec![1], out.clone(), nu).is_ok());
        let m = Sweep::parse("m=1,3").ok();
        let s = ExperimentSpec::new(Mode::ScaBenchmark, c.clone(), vec![3, 1], out.clone(), m).unwrap();
        assert_eq!(s.seeds, vec![1, 3]);
        let eval_sca = Config {
            method: Method::Sca,
            ..c
        };
        assert!(ExperimentSpec::new(Mode::Eval, eval_sca, vec![1], out, None).is_err());
    }
}
