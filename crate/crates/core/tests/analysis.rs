use npsp_core::analysis::{
    count_instances, forced_guesses, knowledge_closure, mask_safety_violations, merlin_reconstruct,
    SafetyViolation,
};
use npsp_core::protocol::PartyId;
use npsp_core::shares::{generate_share_bundles, MaskIdAllocator, Rng};
use npsp_core::{run_protocol, ModVector, Policy, Ring, RunOptions};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn inputs(n: usize, seed: u64) -> Vec<ModVector> {
    let mut rng = Rng::with_stream(seed, 77);
    (0..n).map(|_| rng.vector(3, &Ring::wrapping())).collect()
}

fn run(n: usize, seed: u64, policy: Policy) -> npsp_core::RunOutcome {
    run_protocol(
        &inputs(n, seed),
        &RunOptions::new(Ring::wrapping(), seed, policy),
    )
    .unwrap()
}

#[test]
fn secure_server_knows_masks_but_no_inputs() {
    let out = run(3, 1, Policy::Secure);
    let view = out.view_of(out.ttp()).unwrap();
    let k = knowledge_closure(&view, &out.transcript);
    assert!(k.knows_mask(out.transcript.messages()[0].meta.masks[0]));
    assert!(k.known_inputs().is_empty());
}

#[test]
fn flawed_server_learns_first_input() {
    let out = run(3, 1, Policy::Flawed);
    let view = out.view_of(out.ttp()).unwrap();
    let k = knowledge_closure(&view, &out.transcript);
    assert!(k.knows_input(1));
    assert_eq!(k.known_inputs(), vec![1, 2, 3]);
}

#[test]
fn data_parties_never_learn_other_inputs() {
    for policy in [Policy::Secure, Policy::Flawed] {
        for n in 2..=5 {
            let out = run(n, n as u64, policy);
            for p in out.data_parties() {
                let k = knowledge_closure(&out.view_of(p).unwrap(), &out.transcript);
                let own = p.data_index().unwrap();
                assert_eq!(k.known_inputs(), vec![own], "{p} n={n} {policy}");
            }
        }
    }
}

#[test]
fn safety_violations_only_under_flawed_policy() {
    for n in 3..=5 {
        assert!(mask_safety_violations(&run(n, 3, Policy::Secure)).is_empty());
        let bad = mask_safety_violations(&run(n, 3, Policy::Flawed));
        assert!(bad
            .iter()
            .any(|v| matches!(v, SafetyViolation::ServerParticipates { .. })));
        assert!(bad
            .iter()
            .any(|v| matches!(v, SafetyViolation::MaskDelivered { .. })));
    }
    assert!(mask_safety_violations(&run(2, 3, Policy::Flawed)).is_empty());
}

#[test]
fn attack_dichotomy_three_parties() {
    let data = inputs(3, 5);
    let ring = Ring::wrapping();
    let flawed = run(3, 5, Policy::Flawed);
    let got = merlin_reconstruct(
        &flawed.view_of(flawed.ttp()).unwrap(),
        &flawed.instances,
        &ring,
    );
    assert_eq!(got.len(), 3);
    for (p, v) in got {
        assert_eq!(v, data[p.data_index().unwrap() as usize - 1]);
    }

    let secure = run(3, 5, Policy::Secure);
    let view = secure.view_of(secure.ttp()).unwrap();
    assert!(merlin_reconstruct(&view, &secure.instances, &ring).is_empty());
    for (p, g) in forced_guesses(&view, &secure.instances, &ring) {
        assert_ne!(g, data[p.data_index().unwrap() as usize - 1]);
    }
}

#[test]
fn two_parties_give_the_server_nothing() {
    let out = run(2, 2, Policy::Flawed);
    let view = out.view_of(out.ttp()).unwrap();
    assert!(merlin_reconstruct(&view, &out.instances, &Ring::wrapping()).is_empty());
}

#[test]
fn census_matches_execution() {
    for n in 2..=5 {
        let out = run(n, 0, Policy::Secure);
        let c = count_instances(n);
        assert_eq!(out.instances.len() as u128, c.total_instances);
        assert_eq!(out.transcript.len() as u128, c.messages);
        assert_eq!(c.per_depth.iter().sum::<u128>(), c.total_instances);
    }
    assert_eq!(count_instances(5).total_instances, 336);
}

#[test]
fn masked_values_are_uniform_mod_251() {
    let ring = Ring::new(251).unwrap();
    let fixed = ModVector::new(vec![200, 0], &ring).unwrap();
    let parties = [PartyId::Data(1), PartyId::Data(2), PartyId::Data(3)];
    let mut rng = Rng::new(12);
    let mut ids = MaskIdAllocator::default();
    let mut counts = [[0u32; 251]; 2];
    let samples = 10_000;
    for _ in 0..samples {
        let b = generate_share_bundles(&parties, 2, &ring, &mut rng, &mut ids).unwrap();
        let masked = fixed.add(&b[2].mask_matrix, &ring).unwrap();
        for (k, &x) in masked.as_slice().iter().enumerate() {
            counts[k][x as usize] += 1;
        }
    }
    let critical = ChiSquared::new(250.0).unwrap().inverse_cdf(0.999);
    let e = samples as f64 / 251.0;
    for column in counts {
        let stat: f64 = column.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        assert!(stat < critical, "{stat} >= {critical}");
    }
}

#[test]
fn reconstruction_agrees_with_closure() {
    for n in 3..=5 {
        let out = run(n, 8, Policy::Flawed);
        let view = out.view_of(out.ttp()).unwrap();
        let k = knowledge_closure(&view, &out.transcript);
        for p in merlin_reconstruct(&view, &out.instances, &Ring::wrapping()).keys() {
            assert!(k.knows_input(p.data_index().unwrap()), "{p} n={n}");
        }
    }
}
