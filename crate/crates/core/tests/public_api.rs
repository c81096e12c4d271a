use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikebmi_core::learning::{BanditronLearner, OnlineRule};
use spikebmi_core::metrics::{forward_cost, LayerKind};
use spikebmi_core::ops::{apply_perturbation, CenterOutEnv, EnvConfig, OpsBrain, OpsParams, PerturbationKind, PerturbationSpec};
use spikebmi_core::sim::ClosedLoopSystem;
use spikebmi_core::snn::{NetworkConfig, SpikeBinVector};
use spikebmi_core::{Exact, ExactCost, Network, Network32};

fn net(seed: u64) -> Network {
    Network::init(&NetworkConfig::closed_loop(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn checkpoint_bytes_round_trip() {
    let mut a = net(1);
    a.round_to_storage();
    let b = Network::read_from(a.to_bytes().as_slice()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.weight_checksum(0..3), b.weight_checksum(0..3));
}

#[test]
fn single_and_double_precision_agree_on_spikes() {
    let mut a = net(2);
    a.round_to_storage();
    let mut b: Network32 = a.cast();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agree = 0;
    let steps = 200;
    for _ in 0..steps {
        let x = SpikeBinVector::from_bits((0..46).map(|_| rng.random_bool(0.2)).collect());
        let (fa, fb) = (a.forward(&x).unwrap(), b.forward(&x).unwrap());
        agree += (fa.out_spikes == fb.out_spikes) as usize;
    }
    // rounding can flip a spike right at threshold, but only rarely
    assert!(agree >= steps * 95 / 100, "{agree}/{steps}");
}

#[test]
fn exact_costs_are_rational() {
    let c: ExactCost = forward_cost(&[4, 3, 2], &[Exact::new(1, 3), Exact::new(1, 2)], LayerKind::Snn, 1).unwrap();
    // (2/3)*12 + 2*3 + (1/2)*6 + 2*2
    assert_eq!(c.mem_access, Exact::from(21));
    assert_eq!(c.macs, Exact::from(5));
}

#[test]
fn closed_loop_trial_terminates_and_is_reproducible() {
    let run = || {
        let brain = OpsBrain::new(&OpsParams::default(), 5).unwrap();
        let env = CenterOutEnv::new(EnvConfig::default()).unwrap();
        let rule = OnlineRule::Banditron(BanditronLearner::new(0.1, 4, 5).unwrap());
        let mut sys = ClosedLoopSystem::new(brain, env, net(5), rule);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        (0..3).map(|_| sys.run_trial(&mut rng, 0.01, true).unwrap()).collect::<Vec<_>>()
    };
    let a = run();
    assert_eq!(a, run());
    let max_steps = EnvConfig::default().max_steps() as usize;
    assert!(a.iter().all(|t| !t.trajectory.is_empty() && t.trajectory.len() <= max_steps + 1));
}

#[test]
fn loss_of_neurons_silences_the_chosen_units() {
    let mut brain = OpsBrain::new(&OpsParams::default(), 8).unwrap();
    let spec = PerturbationSpec::new(PerturbationKind::LossOfNeurons, 30.0 / 46.0, 0, 1);
    let lost = apply_perturbation(&mut brain, &spec).unwrap();
    assert_eq!(lost.len(), 30);
    for _ in 0..200 {
        let s = brain.generate([0.7, -0.7]);
        assert!(lost.iter().all(|&k| !s.get(k)));
    }
}
