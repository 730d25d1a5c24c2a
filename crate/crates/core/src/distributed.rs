//! Fan-out of one IDGS run over its `2^k` node tasks and the classical merge.
//!
//! Each node owns the subfunction `f_i` (the last k input bits fixed to `i`),
//! recovers a p-bit prefix in stage 1 and the remaining bits in stage 2, and
//! reports a candidate `prefix ∥ suffix ∥ i` that the merge step checks
//! against `f` classically. Node randomness is derived from
//! `base_seed + index(i)`, so the degree of parallelism never changes the
//! result.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{idgs_stage1, idgs_stage2};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::noise::{noisy_shot_distribution, NoiseSpec};
use crate::operators::{long_circuit, stage1_circuit};
use crate::oracle::{MarkedOracle, SubfunctionId};
use crate::planner::{idgs_plan_with_branch, Branch, IdgsPlan};

/// Widest stage-2 register that `brute_force_tail` replaces with a
/// classical scan.
pub const BRUTE_FORCE_TAIL_MAX_WIDTH: usize = 4;

/// Single-target oracle as it appears in configs and worker requests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub n: usize,
    pub target: BitString,
}

impl OracleSpec {
    pub fn build(&self) -> Result<MarkedOracle> {
        MarkedOracle::marked(self.n, self.target)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub base_seed: u64,
    pub parallelism: usize,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub brute_force_tail: bool,
    #[serde(default)]
    pub branch: Branch,
}

impl RunConfig {
    pub fn new(n: usize, k: usize, p: usize) -> Self {
        Self {
            n,
            k,
            p,
            base_seed: 0,
            parallelism: 1,
            noise: None,
            brute_force_tail: false,
            branch: Branch::Positive,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.parallelism == 0 {
            return Err(Error::OutOfRange {
                what: "parallelism",
                value: 0,
                allowed: ">= 1".into(),
            });
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeReport {
    pub id: SubfunctionId,
    pub prefix: BitString,
    pub suffix: BitString,
    /// `prefix ∥ suffix ∥ i`.
    pub candidate: BitString,
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "target", rename_all = "kebab-case")]
pub enum SearchOutcome {
    Found(BitString),
    NotFound,
}

impl SearchOutcome {
    pub fn target(&self) -> Option<BitString> {
        match self {
            SearchOutcome::Found(t) => Some(*t),
            SearchOutcome::NotFound => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub plan: IdgsPlan,
    pub reports: Vec<NodeReport>,
    pub outcome: SearchOutcome,
}

/// Per-node options that are not part of the plan.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NodeOptions {
    pub noise: Option<NoiseSpec>,
    pub brute_force_tail: bool,
}

/// Seed of node `id` in a run seeded with `base_seed`.
pub fn node_seed(base_seed: u64, id: &SubfunctionId) -> u64 {
    base_seed.wrapping_add(id.i().value())
}

/// Run both stages for one node and verify its candidate against `f`.
pub fn run_node(f: &MarkedOracle, id: &SubfunctionId, plan: &IdgsPlan, seed: u64, opts: &NodeOptions) -> Result<NodeReport> {
    if f.width() != plan.n || id.k() != plan.k {
        return Err(Error::Parameter(format!(
            "node ({}-bit oracle, k = {}) does not match plan (n = {}, k = {})",
            f.width(),
            id.k(),
            plan.n,
            plan.k
        )));
    }
    let f_i = f.subfunction(id)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (seed1, seed2): (u64, u64) = (rng.gen(), rng.gen());

    let prefix = match &opts.noise {
        None => idgs_stage1(&f_i, plan, seed1)?.measured,
        Some(spec) => {
            let c = stage1_circuit(plan, &f_i)?;
            let ch = spec.build_channel()?;
            let mut r = ChaCha8Rng::seed_from_u64(seed1);
            noisy_shot_distribution(&c, &ch, spec.backend, plan.p, &mut r)?.sample_one(&mut r)
        }
    };

    let f_ix = f_i.restrict_prefix(&prefix)?;
    let s = plan.block_width();
    let suffix = if opts.brute_force_tail && s <= BRUTE_FORCE_TAIL_MAX_WIDTH {
        BitString::all(s)
            .find(|y| f_ix.eval(y).unwrap_or(false))
            .unwrap_or(BitString::new(s, 0)?)
    } else {
        match &opts.noise {
            None => idgs_stage2(&f_ix, seed2)?.measured,
            Some(spec) => {
                let c = long_circuit(&f_ix, plan.stage2.omega, plan.stage2.iterations)?;
                let ch = spec.build_channel()?;
                let mut r = ChaCha8Rng::seed_from_u64(seed2);
                noisy_shot_distribution(&c, &ch, spec.backend, s, &mut r)?.sample_one(&mut r)
            }
        }
    };

    let candidate = prefix.concat(&suffix)?.concat(&id.i())?;
    Ok(NodeReport {
        id: *id,
        prefix,
        suffix,
        candidate,
        verified: f.eval(&candidate)?,
    })
}

fn plan_for(f: &MarkedOracle, cfg: &RunConfig) -> Result<IdgsPlan> {
    cfg.validate()?;
    if f.width() != cfg.n {
        return Err(Error::WidthMismatch {
            expected: cfg.n,
            found: f.width(),
        });
    }
    if f.target().is_none() {
        return Err(Error::Parameter("distributed search needs exactly one marked string".into()));
    }
    idgs_plan_with_branch(cfg.n, cfg.k, cfg.p, cfg.branch)
}

/// Run all `2^k` nodes in-process on a pool of `parallelism` threads and
/// merge.
pub fn run_idgs(f: &MarkedOracle, cfg: &RunConfig) -> Result<RunResult> {
    let plan = plan_for(f, cfg)?;
    let opts = NodeOptions {
        noise: cfg.noise,
        brute_force_tail: cfg.brute_force_tail,
    };
    let ids: Vec<SubfunctionId> = SubfunctionId::all(cfg.k).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::Worker(format!("cannot start node pool: {e}")))?;
    let reports: Vec<NodeReport> = pool.install(|| {
        ids.par_iter()
            .map(|id| run_node(f, id, &plan, node_seed(cfg.base_seed, id), &opts))
            .collect::<Result<_>>()
    })?;
    let outcome = merge_and_verify(f, &reports)?;
    Ok(RunResult {
        plan,
        reports,
        outcome,
    })
}

/// The unique verified candidate, or `NotFound`. Reports may arrive in any
/// order; they must cover every node exactly once.
pub fn merge_and_verify(f: &MarkedOracle, reports: &[NodeReport]) -> Result<SearchOutcome> {
    let Some(first) = reports.first() else {
        return Err(Error::Integrity("no node reports".into()));
    };
    let k = first.id.k();
    let mut seen = vec![false; 1usize << k];
    for r in reports {
        if r.id.k() != k || r.candidate.width() != f.width() {
            return Err(Error::Integrity(format!("malformed report from node {}", r.id.i())));
        }
        let slot = &mut seen[r.id.i().index()];
        if *slot {
            return Err(Error::Integrity(format!("duplicate report from node {}", r.id.i())));
        }
        *slot = true;
        if r.candidate.suffix(k) != r.id.i() {
            return Err(Error::Integrity(format!(
                "node {} reported a candidate outside its subfunction",
                r.id.i()
            )));
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Integrity(format!(
            "missing report from node {}",
            BitString::new(k, missing as u64)?
        )));
    }
    let mut verified: Vec<BitString> = Vec::new();
    for r in reports {
        if f.eval(&r.candidate)? {
            verified.push(r.candidate);
        }
    }
    verified.sort();
    verified.dedup();
    match verified.as_slice() {
        [] => Ok(SearchOutcome::NotFound),
        [t] => Ok(SearchOutcome::Found(*t)),
        many => Err(Error::Integrity(format!(
            "{} distinct candidates verified for a single-target oracle",
            many.len()
        ))),
    }
}

/// One node's work order in multi-process mode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRequest {
    pub oracle: OracleSpec,
    pub i: BitString,
    pub k: usize,
    pub p: usize,
    pub seed: u64,
}

impl NodeRequest {
    pub fn run(&self) -> Result<NodeReport> {
        let f = self.oracle.build()?;
        if self.i.width() != self.k {
            return Err(Error::WidthMismatch {
                expected: self.k,
                found: self.i.width(),
            });
        }
        let plan = crate::planner::idgs_plan(self.oracle.n, self.k, self.p)?;
        run_node(&f, &SubfunctionId::new(self.i), &plan, self.seed, &NodeOptions::default())
    }
}

#[derive(Serialize)]
struct WorkerError {
    error: String,
}

/// Worker loop: one JSON request per input line, one JSON report (or
/// `{"error": …}`) per output line.
pub fn serve_node_requests<R: BufRead, W: Write>(input: R, mut output: W) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = serde_json::from_str::<NodeRequest>(&line)
            .map_err(|e| Error::Parameter(format!("bad request: {e}")))
            .and_then(|req| req.run());
        let text = match reply {
            Ok(report) => serde_json::to_string(&report),
            Err(e) => serde_json::to_string(&WorkerError { error: e.to_string() }),
        }
        .expect("report serializes");
        writeln!(output, "{text}")?;
        output.flush()?;
    }
    Ok(())
}

/// Run every node as a separate OS process (`<worker> node`), exchanging
/// only classical JSON lines, at most `parallelism` processes at a time.
pub fn run_idgs_multiprocess(f: &MarkedOracle, cfg: &RunConfig, worker: &Path) -> Result<RunResult> {
    let plan = plan_for(f, cfg)?;
    if cfg.noise.is_some() || cfg.brute_force_tail {
        return Err(Error::Unsupported(
            "multi-process mode runs noiseless nodes without the brute-force tail".into(),
        ));
    }
    let target = f.target().expect("checked by plan_for");
    let ids: Vec<SubfunctionId> = SubfunctionId::all(cfg.k).collect();
    let mut reports = Vec::with_capacity(ids.len());
    for chunk in ids.chunks(cfg.parallelism) {
        let mut children = Vec::with_capacity(chunk.len());
        for id in chunk {
            let req = NodeRequest {
                oracle: OracleSpec { n: cfg.n, target },
                i: id.i(),
                k: cfg.k,
                p: cfg.p,
                seed: node_seed(cfg.base_seed, id),
            };
            let mut child = Command::new(worker)
                .arg("node")
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| Error::Worker(format!("cannot spawn {}: {e}", worker.display())))?;
            let mut stdin = child.stdin.take().expect("piped stdin");
            let line = serde_json::to_string(&req).expect("request serializes");
            writeln!(stdin, "{line}").map_err(|e| Error::Worker(e.to_string()))?;
            drop(stdin);
            children.push(child);
        }
        for mut child in children {
            let stdout = child.stdout.take().expect("piped stdout");
            let mut line = String::new();
            BufReader::new(stdout)
                .read_line(&mut line)
                .map_err(|e| Error::Worker(e.to_string()))?;
            let status = child.wait().map_err(|e| Error::Worker(e.to_string()))?;
            if !status.success() {
                return Err(Error::Worker(format!("node process exited with {status}")));
            }
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| Error::Worker(format!("unreadable reply {line:?}: {e}")))?;
            if let Some(msg) = value.get("error") {
                return Err(Error::Worker(msg.to_string()));
            }
            reports.push(serde_json::from_value(value).map_err(|e| Error::Worker(e.to_string()))?);
        }
    }
    let outcome = merge_and_verify(f, &reports)?;
    Ok(RunResult {
        plan,
        reports,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(s: &str) -> MarkedOracle {
        let t = BitString::parse(s).unwrap();
        MarkedOracle::marked(t.width(), t).unwrap()
    }

    #[test]
    fn five_qubit_run() {
        let f = oracle("01100");
        let r = run_idgs(&f, &RunConfig::new(5, 1, 2)).unwrap();
        assert_eq!(r.outcome, SearchOutcome::Found(f.target().unwrap()));
        let node0 = &r.reports[0];
        assert_eq!((node0.prefix.to_string(), node0.suffix.to_string()), ("01".into(), "10".into()));
        assert!(node0.verified);
        assert!(!r.reports[1].verified);
    }

    #[test]
    fn parallelism_does_not_change_reports() {
        let f = oracle("1011001");
        let mut cfg = RunConfig::new(7, 2, 1);
        cfg.base_seed = 99;
        let a = run_idgs(&f, &cfg).unwrap();
        cfg.parallelism = 4;
        let b = run_idgs(&f, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn merge_is_order_independent() {
        let f = oracle("1011001");
        let r = run_idgs(&f, &RunConfig::new(7, 2, 1)).unwrap();
        let mut rev = r.reports.clone();
        rev.reverse();
        assert_eq!(merge_and_verify(&f, &rev).unwrap(), r.outcome);
    }

    #[test]
    fn merge_rejects_incomplete_or_forged_reports() {
        let f = oracle("1011001");
        let r = run_idgs(&f, &RunConfig::new(7, 2, 1)).unwrap();
        assert!(merge_and_verify(&f, &r.reports[1..]).is_err());
        let mut dup = r.reports.clone();
        dup[1] = dup[0].clone();
        assert!(merge_and_verify(&f, &dup).is_err());
        assert!(merge_and_verify(&f, &[]).is_err());
    }

    #[test]
    fn all_unverified_is_not_found() {
        let f = oracle("1011001");
        let mut reports = run_idgs(&f, &RunConfig::new(7, 2, 1)).unwrap().reports;
        for r in &mut reports {
            let wrong = r.candidate.value() ^ (1 << 6);
            r.candidate = BitString::new(7, wrong).unwrap();
        }
        assert_eq!(merge_and_verify(&f, &reports).unwrap(), SearchOutcome::NotFound);
    }

    #[test]
    fn single_node_run() {
        let f = oracle("101101");
        let r = run_idgs(&f, &RunConfig::new(6, 0, 2)).unwrap();
        assert_eq!(r.reports.len(), 1);
        assert_eq!(r.outcome.target(), f.target());
    }

    #[test]
    fn brute_force_tail() {
        let f = oracle("01100");
        let mut cfg = RunConfig::new(5, 1, 2);
        cfg.brute_force_tail = true;
        assert_eq!(run_idgs(&f, &cfg).unwrap().outcome.target(), f.target());
    }

    #[test]
    fn worker_protocol_round_trip() {
        let req = r#"{"oracle":{"n":5,"target":"01100"},"i":"0","k":1,"p":2,"seed":0}"#;
        let mut out = Vec::new();
        serve_node_requests(format!("{req}\n\nnot json\n").as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let report: NodeReport = serde_json::from_str(lines[0]).unwrap();
        assert!(report.verified);
        assert_eq!(report.candidate.to_string(), "01100");
        assert!(lines[1].contains("error"));
    }

    #[test]
    fn config_validation() {
        let mut cfg = RunConfig::new(5, 1, 2);
        cfg.parallelism = 0;
        assert!(run_idgs(&oracle("01100"), &cfg).is_err());
        assert!(run_idgs(&oracle("0110"), &RunConfig::new(5, 1, 2)).is_err());
    }
}
