//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use npsp_core::analysis::{
    count_instances, expand_term, expected_chain_coefficient, forced_guesses,
    mask_safety_violations, merlin_reconstruct, plaintext_oracle, symbolic_expand, Factor,
};
use npsp_core::protocol::{determine_sub_instances, two_party_rounds, PartyId};
use npsp_core::ring::mask;
use npsp_core::shares::{generate_share_bundles, MaskIdAllocator, Rng};
use npsp_core::{run_protocol, ModVector, Policy, Ring, RunOptions};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const SWEEP_N: [usize; 5] = [2, 3, 4, 5, 6];
const SWEEP_LEN: [usize; 4] = [1, 2, 8, 16];
const SWEEP_SEEDS: u64 = 100;

fn random_inputs(n: usize, len: usize, ring: &Ring, seed: u64) -> Vec<ModVector> {
    let mut rng = Rng::with_stream(seed, 0xA11CE);
    (0..n).map(|_| rng.vector(len, ring)).collect()
}

/// Per-run facts gathered once by the correctness sweep and reused by the
/// rotation and census criteria.
struct SweepRun {
    n: usize,
    len: usize,
    policy: Policy,
    seed: u64,
    oracle_ok: bool,
    server_outside: bool,
    safety_violations: usize,
    instances: usize,
    direct_children: usize,
    max_depth: usize,
}

struct Sweep {
    runs: Vec<SweepRun>,
    elapsed: Duration,
}

fn sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let start = Instant::now();
        let ring = Ring::wrapping();
        let mut runs = Vec::new();
        for n in SWEEP_N {
            for len in SWEEP_LEN {
                for policy in [Policy::Secure, Policy::Flawed] {
                    for seed in 0..SWEEP_SEEDS {
                        let inputs = random_inputs(n, len, &ring, seed);
                        let out = run_protocol(&inputs, &RunOptions::new(ring, seed, policy))
                            .expect("run completes");
                        let oracle = plaintext_oracle(&inputs, &ring).unwrap();
                        let secure = policy == Policy::Secure;
                        runs.push(SweepRun {
                            n,
                            len,
                            policy,
                            seed,
                            oracle_ok: out.result == oracle,
                            server_outside: out.instances.iter().all(|i| !i.involves(&i.ttp)),
                            safety_violations: if secure {
                                mask_safety_violations(&out).len()
                            } else {
                                0
                            },
                            instances: out.instances.len(),
                            direct_children: out.top().children.len(),
                            max_depth: out.max_depth(),
                        });
                    }
                }
            }
        }
        Sweep {
            runs,
            elapsed: start.elapsed(),
        }
    })
}

fn criterion_1() -> String {
    let s = sweep();
    let bad: Vec<_> = s
        .runs
        .iter()
        .filter(|r| !r.oracle_ok)
        .map(|r| (r.n, r.len, r.policy, r.seed))
        .collect();
    assert!(bad.is_empty(), "oracle mismatches: {bad:?}");
    assert_eq!(
        s.runs.len(),
        SWEEP_N.len() * SWEEP_LEN.len() * 2 * SWEEP_SEEDS as usize
    );
    assert!(
        s.elapsed < Duration::from_secs(300),
        "sweep took {:?}",
        s.elapsed
    );
    format!(
        "{} runs (n=2..6, L in {{1,2,8,16}}, both policies, {SWEEP_SEEDS} seeds) equal the oracle mod 2^64 in {:.1}s",
        s.runs.len(),
        s.elapsed.as_secs_f64()
    )
}

fn criterion_2() -> String {
    let start = Instant::now();
    for n in 3..=7usize {
        let decomposition = expand_term(&vec![Factor::Masked; n]);
        assert_eq!(decomposition.len(), 1 << n);
        assert!(decomposition.values().all(|&c| c == 1), "n={n}");

        let e = symbolic_expand(n).unwrap();
        let full = (1u64 << n) - 1;
        for t in 0..=full {
            let size = t.count_ones() as usize;
            let want = if t == full {
                1
            } else if (1..=n - 2).contains(&size) {
                -((n - 1 - size) as i64)
            } else {
                0
            };
            assert_eq!(e.coefficient(t), want, "n={n} T={t:b}");
            assert_eq!(want, expected_chain_coefficient(n, t));
        }
        // the (n-1) sum r_i terms cancel the n-1 subtractions of phi(prod R)
        assert_eq!(e.all_random_before_shares, -(n as i64 - 1));
        assert_eq!(e.share_coefficient, n as i64 - 1);
        // aggregation weights are exactly the negated residual coefficients
        for spec in determine_sub_instances(n) {
            assert_eq!(e.coefficient(spec.bits()), -(spec.coefficient as i64));
        }
        let covered: BTreeSet<u64> = determine_sub_instances(n)
            .iter()
            .map(|s| s.bits())
            .collect();
        for (t, c) in e.residual() {
            assert_eq!(c != 0, covered.contains(&t), "n={n} T={t:b}");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10));
    format!(
        "decomposition and residual coefficients exact for n=3..7 in {:.3}s",
        elapsed.as_secs_f64()
    )
}

fn criterion_3() -> String {
    let start = Instant::now();
    let ring = Ring::wrapping();
    let mut flawed_hits = 0;
    let mut secure_misses = 0;
    let mut total = 0;
    for n in [3usize, 4] {
        for seed in 0..50u64 {
            total += 1;
            let inputs = random_inputs(n, 4, &ring, 1_000 + seed);
            let truth = |p: &PartyId| &inputs[p.data_index().unwrap() as usize - 1];

            let out = run_protocol(&inputs, &RunOptions::new(ring, seed, Policy::Flawed)).unwrap();
            let view = out.view_of(out.ttp()).unwrap();
            let got = merlin_reconstruct(&view, &out.instances, &ring);
            if got.len() == n && got.iter().all(|(p, v)| truth(p) == v) {
                flawed_hits += 1;
            }

            let out = run_protocol(&inputs, &RunOptions::new(ring, seed, Policy::Secure)).unwrap();
            let view = out.view_of(out.ttp()).unwrap();
            assert!(
                merlin_reconstruct(&view, &out.instances, &ring).is_empty(),
                "n={n} seed={seed}"
            );
            let guesses = forced_guesses(&view, &out.instances, &ring);
            assert_eq!(guesses.len(), n, "forced guess for every party");
            if guesses.iter().all(|(p, g)| truth(p) != g) {
                secure_misses += 1;
            }
        }
    }
    assert_eq!(
        flawed_hits, total,
        "flawed reconstruction must be exact every run"
    );
    assert_eq!(secure_misses, total, "secure forced guesses must all miss");
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(30));
    format!(
        "flawed: {flawed_hits}/{total} exact reconstructions; secure: empty map, {secure_misses}/{total} forced guesses wrong ({:.2}s)",
        elapsed.as_secs_f64()
    )
}

fn criterion_4() -> String {
    let secure: Vec<&SweepRun> = sweep()
        .runs
        .iter()
        .filter(|r| r.policy == Policy::Secure)
        .collect();
    for r in &secure {
        assert!(
            r.server_outside,
            "server participates: n={} L={} seed={}",
            r.n, r.len, r.seed
        );
        assert_eq!(
            r.safety_violations, 0,
            "mask leak: n={} L={} seed={}",
            r.n, r.len, r.seed
        );
    }
    let flawed_leaky = sweep()
        .runs
        .iter()
        .filter(|r| r.policy == Policy::Flawed && r.n >= 3 && !r.server_outside)
        .count();
    format!(
        "{} secure runs: every server outside its instance, no mask reached a holder (flawed runs with n>=3 violating rotation: {flawed_leaky})",
        secure.len()
    )
}

fn criterion_5() -> String {
    let start = Instant::now();
    let census: Vec<_> = (2..=10).map(count_instances).collect();
    let census_time = start.elapsed();
    assert!(census_time < Duration::from_secs(5));
    let direct: Vec<u128> = census[1..4].iter().map(|c| c.direct_children).collect();
    assert_eq!(direct, vec![3, 10, 25]);
    let totals: Vec<u128> = census[1..5].iter().map(|c| c.total_instances).collect();
    assert_eq!(totals, vec![4, 29, 336, 5687]);
    for c in &census {
        let expected = if c.n >= 3 {
            (1u128 << c.n) - c.n as u128 - 2
        } else {
            0
        };
        assert_eq!(c.direct_children, expected);
    }
    assert!(census
        .windows(2)
        .all(|w| w[1].total_instances > 2 * w[0].total_instances));

    for r in &sweep().runs {
        let c = &census[r.n - 2];
        assert_eq!(r.instances as u128, c.total_instances, "n={}", r.n);
        assert_eq!(r.direct_children as u128, c.direct_children, "n={}", r.n);
        assert!(r.max_depth <= r.n.saturating_sub(2));
    }
    let row: Vec<String> = census
        .iter()
        .map(|c| format!("{}:{}", c.n, c.total_instances))
        .collect();
    format!(
        "executed counts match census in all sweep runs; census n=2..10 in {:.4}s: {}",
        census_time.as_secs_f64(),
        row.join(" ")
    )
}

fn criterion_6() -> String {
    let start = Instant::now();
    let ring = Ring::wrapping();
    let parties = [PartyId::Data(1), PartyId::Data(2)];
    let mut rng = Rng::new(606);
    let mut ids = MaskIdAllocator::default();
    for k in 0..1000 {
        let len = 1 + k % 16;
        let a = rng.vector(len, &ring);
        let b = rng.vector(len, &ring);
        let bundles = generate_share_bundles(&parties, len, &ring, &mut rng, &mut ids).unwrap();
        let v2 = rng.element(&ring);
        let t = two_party_rounds(
            &a,
            &b,
            &bundles[0].mask_matrix,
            bundles[0].scalar_share,
            &bundles[1].mask_matrix,
            bundles[1].scalar_share,
            v2,
            &ring,
        )
        .unwrap();
        let oracle = plaintext_oracle(&[a.clone(), b.clone()], &ring).unwrap();
        assert_eq!(ring.add(t.v1, t.v2), oracle, "instance {k}");

        let out = run_protocol(&[a, b], &RunOptions::new(ring, k as u64, Policy::Secure)).unwrap();
        assert_eq!(out.result, oracle, "engine instance {k}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5));
    format!(
        "v1 + v2 = phi(A.B) for 1000 random instances, local rounds and engine ({:.2}s)",
        elapsed.as_secs_f64()
    )
}

fn criterion_7() -> String {
    let ring = Ring::wrapping();
    for k in 0..20u64 {
        let n = 2 + (k % 4) as usize;
        let len = 1 + (k % 5) as usize;
        let inputs = random_inputs(n, len, &ring, 7_000 + k);
        let policy = if k % 2 == 0 {
            Policy::Secure
        } else {
            Policy::Flawed
        };
        let a = run_protocol(&inputs, &RunOptions::new(ring, k, policy)).unwrap();
        let b = run_protocol(&inputs, &RunOptions::new(ring, k, policy)).unwrap();
        assert_eq!(
            a.transcript.to_jsonl(),
            b.transcript.to_jsonl(),
            "config {k}"
        );
        let c = run_protocol(&inputs, &RunOptions::new(ring, k + 1_000, policy)).unwrap();
        assert_eq!(a.result, c.result, "config {k}");
        assert_ne!(a.transcript.to_jsonl(), c.transcript.to_jsonl());
    }
    "20 configs: same seed gives identical transcript bytes; different seeds give the same result"
        .into()
}

fn criterion_8() -> String {
    let ring = Ring::new(251).unwrap();
    let fixed = ModVector::new(vec![17], &ring).unwrap();
    let parties = [PartyId::Data(1), PartyId::Data(2)];
    let mut rng = Rng::new(8);
    let mut ids = MaskIdAllocator::default();
    let samples = 10_000usize;
    let mut counts = vec![0u64; 251];
    for _ in 0..samples {
        let bundles = generate_share_bundles(&parties, 1, &ring, &mut rng, &mut ids).unwrap();
        let masked = mask(&fixed, &bundles[0].mask_matrix, &ring).unwrap();
        counts[masked.as_slice()[0] as usize] += 1;
    }
    let expected = samples as f64 / 251.0;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let critical = ChiSquared::new(250.0).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat:.1} >= {critical:.1}");
    format!("chi-square {stat:.1} < critical {critical:.1} (df=250, alpha=0.001, 10^4 samples)")
}

type Criterion = (&'static str, fn() -> String);

fn main() {
    // quiet the default panic printer; failures are reported below
    panic::set_hook(Box::new(|_| {}));
    let criteria: [Criterion; 8] = [
        ("1 oracle equivalence", criterion_1),
        ("2 decomposition identity", criterion_2),
        ("3 attack dichotomy", criterion_3),
        ("4 ttp rotation", criterion_4),
        ("5 complexity census", criterion_5),
        ("6 two-party base case", criterion_6),
        ("7 determinism", criterion_7),
        ("8 mask uniformity", criterion_8),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL criterion {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
