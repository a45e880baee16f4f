//! Experiment protocols: the pairwise grid and leave-one-domain-out
//! multi-source runs, both with source-only and target-only baselines.
//!
//! Every cell (method, sources, target, seed) is independent: it gets its
//! own random stream and model, so cells run in parallel and the report is
//! assembled in a fixed order afterwards.

use std::time::Instant;

use rayon::prelude::*;
use shiftkit_core::deep::{dann_fit, deepjdot_fit, m3sda_architecture, m3sda_fit, m3sda_predict, mmdnet_fit};
use shiftkit_core::divergence::{mmd_uniform, KernelSpec};
use shiftkit_core::linalg::Standardizer;
use shiftkit_core::msda::{dadil_atomic_classifiers, dadil_e_predict, dadil_fit, dadil_r_transform, wbt_fit, wjdot_fit};
use shiftkit_core::nn::{accuracy_from_probs, train_erm, Architecture, FeedForwardNet, HeadKind, TrainConfig};
use shiftkit_core::shallow::{jdot_fit, otda_adapt};
use shiftkit_core::{DomainId, LabeledDataset, Matrix, Rng};

use crate::config::{ExperimentConfig, MethodSpec, Protocol};
use crate::domains::{load_domains, Domains};
use crate::error::{Error, Result};
use crate::report::{ExperimentReport, Record, Status, TimingEntry, SOURCE_ONLY, TARGET_ONLY};

#[derive(Debug, Clone)]
pub struct Split {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Stratified split: within every class, a seeded shuffle sends
/// `round(fraction · n_c)` samples to train (at least one when the class
/// has two or more).
pub fn split_domain(ds: &LabeledDataset, fraction: f64, rng: &mut Rng) -> Split {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..ds.class_count() {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels()[i] == c).collect();
        rng.shuffle(&mut idx);
        let mut k = (fraction * idx.len() as f64).round() as usize;
        if idx.len() >= 2 {
            k = k.clamp(1, idx.len() - 1);
        }
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Split { train: ds.subset(&train), test: ds.subset(&test) }
}

#[derive(Debug, Clone)]
enum CellKind {
    SourceOnly,
    TargetOnly,
    Method(usize),
}

#[derive(Debug, Clone)]
struct Cell {
    kind: CellKind,
    method: String,
    sources: Vec<usize>,
    target: usize,
    seed: u64,
}

/// Stable 64-bit FNV-1a, used to give each cell its own stream.
fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

impl Cell {
    fn rng(&self) -> Rng {
        Rng::with_stream(self.seed, fnv1a(&format!("{}|{:?}|{}", self.method, self.sources, self.target)))
    }
}

/// Everything a cell may look at, already standardized with statistics of
/// the labeled training data.
struct CellData {
    sources: Vec<LabeledDataset>,
    target_train: Matrix,
    target_test: LabeledDataset,
}

fn standardized(cell: &Cell, splits: &[Split]) -> Result<CellData> {
    let pooled_x = {
        let parts: Vec<&LabeledDataset> = cell.sources.iter().map(|&s| &splits[s].train).collect();
        LabeledDataset::concat(&parts, DomainId(0))?.features().clone()
    };
    let st = Standardizer::fit(&pooled_x);
    let sources = cell
        .sources
        .iter()
        .map(|&s| splits[s].train.with_features(st.apply(splits[s].train.features())))
        .collect::<shiftkit_core::Result<Vec<_>>>()?;
    let t = &splits[cell.target];
    Ok(CellData {
        sources,
        target_train: st.apply(t.train.features()),
        target_test: t.test.with_features(st.apply(t.test.features()))?,
    })
}

fn pooled(sources: &[LabeledDataset]) -> Result<LabeledDataset> {
    let refs: Vec<&LabeledDataset> = sources.iter().collect();
    Ok(LabeledDataset::concat(&refs, DomainId(0))?)
}

fn seeded(train: &TrainConfig, rng: &mut Rng) -> TrainConfig {
    TrainConfig { seed: rng.next_u64(), ..*train }
}

fn run_method(
    method: &MethodSpec,
    data: &CellData,
    cfg: &ExperimentConfig,
    rng: &mut Rng,
) -> Result<Matrix> {
    let d = data.target_test.dim();
    let nc = data.target_test.class_count();
    let arch = Architecture::classifier(d, &cfg.classifier.hidden, nc);
    let train = seeded(&cfg.classifier.train, rng);
    let xt = &data.target_train;
    let xtest = data.target_test.features();
    let fresh = |rng: &mut Rng, arch: Architecture| FeedForwardNet::new(arch, rng);
    let probs = match method {
        MethodSpec::Otda { solver } => {
            let moved = otda_adapt(&pooled(&data.sources)?, xt, *solver)?;
            let mut net = fresh(rng, arch)?;
            train_erm(&mut net, &moved, &train)?;
            net.forward(xtest, HeadKind::Main)?
        }
        MethodSpec::Jdot(c) => {
            let c = shiftkit_core::shallow::JdotConfig { inner: seeded(&c.inner, rng), ..*c };
            jdot_fit(&pooled(&data.sources)?, xt, &c, fresh(rng, arch)?)?.net.forward(xtest, HeadKind::Main)?
        }
        MethodSpec::MmdNet(c) => {
            let c = shiftkit_core::deep::MmdNetConfig { train: seeded(&c.train, rng), ..*c };
            let mut net = fresh(rng, arch)?;
            mmdnet_fit(&mut net, &pooled(&data.sources)?, xt, &c)?;
            net.forward(xtest, HeadKind::Main)?
        }
        MethodSpec::Dann(c) => {
            let c = shiftkit_core::deep::DannConfig { train: seeded(&c.train, rng), ..*c };
            let mut net = fresh(rng, arch.with_head(HeadKind::Domain, 1))?;
            dann_fit(&mut net, &pooled(&data.sources)?, xt, &c)?;
            net.forward(xtest, HeadKind::Main)?
        }
        MethodSpec::DeepJdot(c) => {
            let c = shiftkit_core::deep::DeepJdotConfig { train: seeded(&c.train, rng), ..*c };
            let mut net = fresh(rng, arch)?;
            deepjdot_fit(&mut net, &pooled(&data.sources)?, xt, &c)?;
            net.forward(xtest, HeadKind::Main)?
        }
        MethodSpec::Wbt(c) => {
            let c = shiftkit_core::msda::WbtConfig { train: seeded(&c.train, rng), ..*c };
            let net = fresh(rng, arch)?;
            wbt_fit(&data.sources, xt, &c, net, rng)?.net.forward(xtest, HeadKind::Main)?
        }
        MethodSpec::Wjdot(c) => {
            let mut c = c.clone();
            c.jdot.inner = seeded(&c.jdot.inner, rng);
            wjdot_fit(&data.sources, xt, &c, fresh(rng, arch)?)?.net.forward(xtest, HeadKind::Main)?
        }
        MethodSpec::DadilR(c) => {
            let fit = dadil_fit(&data.sources, xt, c, rng)?;
            let rec = dadil_r_transform(&fit.dictionary, c)?;
            let mut net = fresh(rng, arch)?;
            train_erm(&mut net, &rec, &train)?;
            net.forward(xtest, HeadKind::Main)?
        }
        MethodSpec::DadilE(c) => {
            let fit = dadil_fit(&data.sources, xt, c, rng)?;
            let hs = dadil_atomic_classifiers(&fit.dictionary, &arch, &train, rng)?;
            dadil_e_predict(&fit.dictionary, &hs, xtest)?
        }
        MethodSpec::M3sda(c) => {
            let c = shiftkit_core::deep::M3sdaConfig { train: seeded(&c.train, rng), ..*c };
            let arch = m3sda_architecture(d, &cfg.classifier.hidden, nc, data.sources.len(), c.beta_variant);
            let mut net = fresh(rng, arch)?;
            let fit = m3sda_fit(&mut net, &data.sources, xt, &c)?;
            m3sda_predict(&net, xtest, &fit.weights)?
        }
    };
    Ok(probs)
}

fn run_cell(cell: &Cell, splits: &[Split], cfg: &ExperimentConfig) -> (Record, TimingEntry) {
    let start = Instant::now();
    let mut diagnostics = std::collections::BTreeMap::new();
    let outcome = (|| -> Result<f64> {
        let mut rng = cell.rng();
        let probs = match cell.kind {
            CellKind::TargetOnly => {
                let t = &splits[cell.target];
                let st = Standardizer::fit(t.train.features());
                let train_set = t.train.with_features(st.apply(t.train.features()))?;
                let arch = Architecture::classifier(train_set.dim(), &cfg.classifier.hidden, train_set.class_count());
                let mut net = FeedForwardNet::new(arch, &mut rng)?;
                train_erm(&mut net, &train_set, &seeded(&cfg.classifier.train, &mut rng))?;
                return Ok(accuracy_from_probs(&net.forward(&st.apply(t.test.features()), HeadKind::Main)?, t.test.labels())?);
            }
            CellKind::SourceOnly => {
                let data = standardized(cell, splits)?;
                let pool = pooled(&data.sources)?;
                let k = KernelSpec::rbf_median(pool.features(), &data.target_train)?;
                diagnostics.insert("mmd_rbf".to_string(), mmd_uniform(pool.features(), &data.target_train, &k)?);
                let arch = Architecture::classifier(pool.dim(), &cfg.classifier.hidden, pool.class_count());
                let mut net = FeedForwardNet::new(arch, &mut rng)?;
                train_erm(&mut net, &pool, &seeded(&cfg.classifier.train, &mut rng))?;
                (net.forward(data.target_test.features(), HeadKind::Main)?, data.target_test)
            }
            CellKind::Method(m) => {
                let data = standardized(cell, splits)?;
                let p = run_method(&cfg.methods[m], &data, cfg, &mut rng)?;
                (p, data.target_test)
            }
        };
        let (p, test) = probs;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Core(shiftkit_core::Error::NonFinite("predictions".into())));
        }
        Ok(accuracy_from_probs(&p, test.labels())?)
    })();
    let wall = start.elapsed().as_secs_f64();
    let (status, accuracy, error) = match outcome {
        Ok(a) => (Status::Ok, Some(a), None),
        Err(e) => {
            log::warn!("{} {:?} -> {} (seed {}): {e}", cell.method, cell.sources, cell.target, cell.seed);
            (Status::Failed, None, Some(e.to_string()))
        }
    };
    let record = Record {
        method: cell.method.clone(),
        sources: cell.sources.clone(),
        target: cell.target,
        seed: cell.seed,
        status,
        accuracy,
        error,
        diagnostics,
    };
    let timing = TimingEntry {
        method: cell.method.clone(),
        sources: cell.sources.clone(),
        target: cell.target,
        seed: cell.seed,
        wall_time_s: wall,
    };
    (record, timing)
}

/// Cell list for a protocol, baselines first, then methods in config order.
fn plan_cells(cfg: &ExperimentConfig, protocol: Protocol, n_domains: usize, baselines_only: bool) -> Result<Vec<Cell>> {
    let mut settings: Vec<(Vec<usize>, usize)> = Vec::new();
    match protocol {
        Protocol::Pairwise => {
            for s in 0..n_domains {
                for t in 0..n_domains {
                    if s != t {
                        settings.push((vec![s], t));
                    }
                }
            }
        }
        Protocol::MultiSource => {
            if n_domains < 3 {
                return Err(Error::Config(format!("multi-source protocol needs at least 3 domains, found {n_domains}")));
            }
            for t in 0..n_domains {
                settings.push(((0..n_domains).filter(|&s| s != t).collect(), t));
            }
        }
    }
    let mut cells = Vec::new();
    let mut push = |kind: CellKind, method: &str, sources: &[usize], target: usize| {
        for &seed in &cfg.seeds {
            cells.push(Cell { kind: kind.clone(), method: method.to_string(), sources: sources.to_vec(), target, seed });
        }
    };
    for t in 0..n_domains {
        push(CellKind::TargetOnly, TARGET_ONLY, &[t], t);
    }
    for (s, t) in &settings {
        push(CellKind::SourceOnly, SOURCE_ONLY, s, *t);
    }
    if !baselines_only {
        for (m, spec) in cfg.methods.iter().enumerate() {
            if protocol == Protocol::Pairwise && spec.needs_several_sources() {
                log::info!("{} skipped in the pairwise protocol", spec.name());
                continue;
            }
            for (s, t) in &settings {
                push(CellKind::Method(m), spec.name(), s, *t);
            }
        }
    }
    Ok(cells)
}

/// Output of one protocol run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub timing: Vec<TimingEntry>,
    pub dropped_runs: usize,
}

/// Run a protocol on already loaded domains.
pub fn run_protocol_on(
    cfg: &ExperimentConfig,
    protocol: Protocol,
    domains: &Domains,
    baselines_only: bool,
) -> Result<RunOutput> {
    cfg.validate()?;
    let n = domains.datasets.len();
    if n == 0 {
        return Err(Error::Config("no domains".into()));
    }
    if protocol == Protocol::Pairwise && n < 2 && !baselines_only && !cfg.methods.is_empty() {
        log::info!("single domain: only the target-only baseline applies");
    }
    let cells = plan_cells(cfg, protocol, n, baselines_only)?;
    // Splits depend only on (seed, domain).
    let splits: Vec<(u64, Vec<Split>)> = cfg
        .seeds
        .iter()
        .map(|&seed| {
            let base = Rng::new(seed);
            let s = domains
                .datasets
                .iter()
                .enumerate()
                .map(|(d, ds)| split_domain(ds, cfg.train_fraction, &mut base.split(d as u64)))
                .collect();
            (seed, s)
        })
        .collect();
    let results: Vec<(Record, TimingEntry)> = cells
        .par_iter()
        .map(|c| {
            let s = &splits.iter().find(|(seed, _)| *seed == c.seed).expect("split per seed").1;
            run_cell(c, s, cfg)
        })
        .collect();
    let (records, timing): (Vec<Record>, Vec<TimingEntry>) = results.into_iter().unzip();
    let report = ExperimentReport::new(protocol, cfg.train_fraction, cfg.seeds.clone(), domains.names.clone(), records);
    Ok(RunOutput { report, timing, dropped_runs: domains.dropped_runs })
}

/// Source-only and target-only baselines only.
pub fn run_baselines(cfg: &ExperimentConfig) -> Result<RunOutput> {
    run_protocol_on(cfg, cfg.protocol, &load_domains(&cfg.dataset)?, true)
}

pub fn run_pairwise(cfg: &ExperimentConfig) -> Result<RunOutput> {
    run_protocol_on(cfg, Protocol::Pairwise, &load_domains(&cfg.dataset)?, false)
}

pub fn run_multi_source(cfg: &ExperimentConfig) -> Result<RunOutput> {
    run_protocol_on(cfg, Protocol::MultiSource, &load_domains(&cfg.dataset)?, false)
}

/// Run the protocol named in the config.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.protocol {
        Protocol::Pairwise => run_pairwise(cfg),
        Protocol::MultiSource => run_multi_source(cfg),
    }
}
