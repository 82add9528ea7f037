//! Command implementations behind the `npsp` binary. Each returns a report
//! whose `render` output is deterministic for a given config and seed;
//! wall-clock timings are kept separate.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::analysis::{
    count_instances, forced_guesses, mask_safety_violations, merlin_reconstruct, plaintext_oracle,
    InstanceCensus,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::protocol::{run_protocol, PartyId, Policy, RunOptions, RunOutcome};
use crate::ring::{Elem, ModVector, Ring};
use crate::shares::Rng;

/// Minimal `[section]` / `key = value` writer.
#[derive(Debug, Default)]
struct Text(String);

impl Text {
    fn section(&mut self, name: &str) {
        if !self.0.is_empty() {
            self.0.push('\n');
        }
        let _ = writeln!(self.0, "[{name}]");
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} = {value}");
    }

    fn kv_str(&mut self, key: &str, value: &str) {
        let _ = writeln!(self.0, "{key} = {value:?}");
    }
}

fn list(v: &ModVector) -> String {
    let items: Vec<String> = v.as_slice().iter().map(u64::to_string).collect();
    format!("[{}]", items.join(", "))
}

fn party_name(cfg: &RunConfig, p: &PartyId) -> String {
    p.data_index()
        .and_then(|i| cfg.name_of(i))
        .map_or_else(|| p.to_string(), str::to_string)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub n: usize,
    pub len: usize,
    pub ring: Ring,
    pub seed: u64,
    pub policy: Policy,
    pub result: Elem,
    pub oracle: Option<Elem>,
    pub instances: usize,
    pub messages: usize,
    pub max_depth: usize,
    pub census: InstanceCensus,
    pub transcript: Option<PathBuf>,
    pub elapsed: Duration,
}

impl RunReport {
    pub fn oracle_match(&self) -> Option<bool> {
        self.oracle.map(|o| o == self.result)
    }

    pub fn passed(&self) -> bool {
        self.oracle_match().unwrap_or(true)
    }

    pub fn render(&self) -> String {
        let mut t = Text::default();
        t.section("run");
        t.kv("parties", self.n);
        t.kv("length", self.len);
        t.kv_str("modulus", &self.ring.to_string());
        t.kv("seed", self.seed);
        t.kv_str("policy", &self.policy.to_string());
        t.kv("result", self.result);
        if let Some(o) = self.oracle {
            t.kv("oracle", o);
            t.kv("oracle_match", o == self.result);
        }
        t.kv("instances", self.instances);
        t.kv("messages", self.messages);
        t.kv("max_depth", self.max_depth);
        if let Some(p) = &self.transcript {
            t.kv_str("transcript", &p.display().to_string());
        }
        render_census(&mut t, &self.census);
        t.0
    }
}

fn render_census(t: &mut Text, c: &InstanceCensus) {
    t.section("census");
    t.kv("n", c.n);
    t.kv("direct_children", c.direct_children);
    t.kv("total_instances", c.total_instances);
    t.kv("messages", c.messages);
    let depth: Vec<String> = c.per_depth.iter().map(u128::to_string).collect();
    t.kv("per_depth", format!("[{}]", depth.join(", ")));
}

fn write_transcript(outcome: &RunOutcome, path: &PathBuf) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(format!("{}: {e}", path.display()));
    let file = File::create(path).map_err(io)?;
    outcome
        .transcript
        .write_jsonl(BufWriter::new(file))
        .map_err(io)
}

pub fn run_command(cfg: &RunConfig) -> Result<RunReport> {
    let inputs = cfg.vectors();
    let start = Instant::now();
    let outcome = run_protocol(&inputs, &cfg.run_options())?;
    let elapsed = start.elapsed();
    let oracle = if cfg.verify {
        Some(plaintext_oracle(&inputs, &cfg.ring)?)
    } else {
        None
    };
    if let Some(path) = &cfg.transcript {
        write_transcript(&outcome, path)?;
    }
    Ok(RunReport {
        n: cfg.n(),
        len: inputs[0].len(),
        ring: cfg.ring,
        seed: cfg.seed,
        policy: cfg.policy,
        result: outcome.result,
        oracle,
        instances: outcome.instances.len(),
        messages: outcome.transcript.len(),
        max_depth: outcome.max_depth(),
        census: count_instances(cfg.n()),
        transcript: cfg.transcript.clone(),
        elapsed,
    })
}

pub fn oracle_command(cfg: &RunConfig) -> Result<Elem> {
    plaintext_oracle(&cfg.vectors(), &cfg.ring)
}

pub fn count_command(n: usize) -> Result<InstanceCensus> {
    if n < 2 {
        return Err(Error::InstanceShape(format!(
            "census needs n >= 2, got {n}"
        )));
    }
    Ok(count_instances(n))
}

pub fn render_count(c: &InstanceCensus) -> String {
    let mut t = Text::default();
    render_census(&mut t, c);
    t.0
}

/// The server's haul under one policy.
#[derive(Debug, Clone)]
pub struct PolicyAttack {
    pub policy: Policy,
    pub result: Elem,
    /// `(party, recovered vector, equals the true vector)`.
    pub reconstructed: Vec<(String, ModVector, bool)>,
    /// `(party, forced guess equals the true vector)`.
    pub forced: Vec<(String, bool)>,
    pub safety_violations: usize,
}

impl PolicyAttack {
    fn all_exact(&self, n: usize) -> bool {
        self.reconstructed.len() == n && self.reconstructed.iter().all(|(_, _, ok)| *ok)
    }

    fn nothing_learned(&self) -> bool {
        self.reconstructed.is_empty() && self.forced.iter().all(|(_, hit)| !hit)
    }
}

#[derive(Debug, Clone)]
pub struct AttackReport {
    pub n: usize,
    pub seed: u64,
    pub warning: Option<String>,
    pub flawed: PolicyAttack,
    pub secure: PolicyAttack,
}

impl AttackReport {
    /// Flawed recovers every vector exactly; secure recovers nothing and
    /// every forced guess misses. Vacuous when no sub-protocols exist.
    pub fn dichotomy_holds(&self) -> bool {
        if self.warning.is_some() {
            return true;
        }
        self.flawed.all_exact(self.n)
            && self.secure.nothing_learned()
            && self.secure.safety_violations == 0
    }

    pub fn render(&self) -> String {
        let mut t = Text::default();
        t.section("attack");
        t.kv("parties", self.n);
        t.kv("seed", self.seed);
        if let Some(w) = &self.warning {
            t.kv_str("warning", w);
        }
        t.kv("dichotomy_holds", self.dichotomy_holds());
        for side in [&self.flawed, &self.secure] {
            t.section(&format!("attack.{}", side.policy));
            t.kv("result", side.result);
            t.kv("recovered", side.reconstructed.len());
            t.kv("safety_violations", side.safety_violations);
            for (name, v, exact) in &side.reconstructed {
                t.kv(&format!("recovered.{name}"), list(v));
                t.kv(&format!("exact.{name}"), exact);
            }
            for (name, hit) in &side.forced {
                t.kv(&format!("forced_guess_hits.{name}"), hit);
            }
        }
        t.0
    }
}

fn attack_under(cfg: &RunConfig, policy: Policy) -> Result<PolicyAttack> {
    let inputs = cfg.vectors();
    let opts = RunOptions {
        policy,
        ..cfg.run_options()
    };
    let outcome = run_protocol(&inputs, &opts)?;
    let view = outcome.view_of(outcome.ttp())?;
    let truth = |p: &PartyId| p.data_index().map(|i| &inputs[i as usize - 1]);
    let reconstructed = merlin_reconstruct(&view, &outcome.instances, &cfg.ring)
        .into_iter()
        .map(|(p, v)| {
            let exact = truth(&p) == Some(&v);
            (party_name(cfg, &p), v, exact)
        })
        .collect();
    let forced = forced_guesses(&view, &outcome.instances, &cfg.ring)
        .into_iter()
        .map(|(p, v)| (party_name(cfg, &p), truth(&p) == Some(&v)))
        .collect();
    Ok(PolicyAttack {
        policy,
        result: outcome.result,
        reconstructed,
        forced,
        safety_violations: mask_safety_violations(&outcome).len(),
    })
}

/// Runs the configured inputs under both policies and reports what the
/// top-level server can reconstruct from its view.
pub fn attack_demo_command(cfg: &RunConfig) -> Result<AttackReport> {
    let warning = (cfg.n() < 3).then(|| {
        "no sub-protocols exist for 2 parties; flawed and secure runs are identical".to_string()
    });
    Ok(AttackReport {
        n: cfg.n(),
        seed: cfg.seed,
        warning,
        flawed: attack_under(cfg, Policy::Flawed)?,
        secure: attack_under(cfg, Policy::Secure)?,
    })
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub min_n: usize,
    pub max_n: usize,
    /// Largest `n` that is actually executed; larger rows are census-only.
    pub exec_cap: usize,
    pub seeds: u64,
    pub len: usize,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            min_n: 2,
            max_n: 10,
            exec_cap: 6,
            seeds: 3,
            len: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Executed {
    pub instances: usize,
    pub messages: usize,
    pub oracle_match: bool,
    pub mean_wall: Duration,
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub census: InstanceCensus,
    pub executed: Option<Executed>,
}

impl BenchRow {
    pub fn consistent(&self) -> bool {
        self.executed.as_ref().is_none_or(|e| {
            e.oracle_match
                && e.instances as u128 == self.census.total_instances
                && e.messages as u128 == self.census.messages
        })
    }
}

/// Random 0/1 vectors: the subset-counting use case.
pub fn indicator_vectors(n: usize, len: usize, rng: &mut Rng) -> Vec<ModVector> {
    (0..n)
        .map(|_| ModVector::from_raw((0..len).map(|_| rng.next_u64() & 1).collect()))
        .collect()
}

pub fn bench_command(opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    if opts.min_n < 2 || opts.min_n > opts.max_n || opts.len == 0 || opts.seeds == 0 {
        return Err(Error::Config(format!("invalid bench range {opts:?}")));
    }
    let ring = Ring::wrapping();
    let mut rows = Vec::new();
    for n in opts.min_n..=opts.max_n {
        let census = count_instances(n);
        let executed = if n <= opts.exec_cap {
            let start = Instant::now();
            let runs: Vec<(usize, usize, bool)> = (0..opts.seeds)
                .into_par_iter()
                .map(|s| {
                    let seed = opts.seed.wrapping_add(s);
                    let inputs =
                        indicator_vectors(n, opts.len, &mut Rng::with_stream(seed, n as u64));
                    let out = run_protocol(&inputs, &RunOptions::new(ring, seed, Policy::Secure))?;
                    let oracle = plaintext_oracle(&inputs, &ring)?;
                    Ok((
                        out.instances.len(),
                        out.transcript.len(),
                        oracle == out.result,
                    ))
                })
                .collect::<Result<_>>()?;
            let wall = start.elapsed();
            let (instances, messages, _) = runs[0];
            Some(Executed {
                instances,
                messages,
                oracle_match: runs
                    .iter()
                    .all(|&(i, m, ok)| ok && i == instances && m == messages),
                mean_wall: wall / opts.seeds as u32,
            })
        } else {
            None
        };
        rows.push(BenchRow { census, executed });
    }
    Ok(rows)
}

/// Fixed-width table. Timings are included only when `timings` is set.
pub fn render_bench(rows: &[BenchRow], timings: bool) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{:>3} {:>16} {:>18} {:>20} {:>9}",
        "n", "direct_children", "total_instances", "messages", "executed"
    );
    if timings {
        out.push_str(&format!(" {:>12}", "wall_ms"));
    }
    out.push('\n');
    for row in rows {
        let c = &row.census;
        let executed = match &row.executed {
            None => "census",
            Some(_) if row.consistent() => "ok",
            Some(_) => "MISMATCH",
        };
        let _ = write!(
            out,
            "{:>3} {:>16} {:>18} {:>20} {:>9}",
            c.n, c.direct_children, c.total_instances, c.messages, executed
        );
        if timings {
            match &row.executed {
                Some(e) => out.push_str(&format!(" {:>12.3}", e.mean_wall.as_secs_f64() * 1e3)),
                None => out.push_str(&format!(" {:>12}", "-")),
            }
        }
        out.push('\n');
    }
    out
}
