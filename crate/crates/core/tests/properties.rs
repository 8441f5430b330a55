use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coaxnoise::fit::{fit, FitConfig, FitProblem, Parameter};
use coaxnoise::measurement::{
    model_spectrum, synth_spectrum, DisplayModel, ModelParameters, NetworkModel,
};
use coaxnoise::splitter::{limit_noise_power, total_noise_power, Arm, LimitIndex, SplitterSetup};
use coaxnoise::tline::{matched_source_power, CableSetup};
use coaxnoise::wave::Termination;
use coaxnoise::FrequencyGrid;

fn random_real_termination(rng: &mut ChaCha8Rng) -> Termination {
    match rng.gen_range(0..4) {
        0 => Termination::Short,
        1 => Termination::Open,
        2 => Termination::Matched,
        _ => Termination::resistor(10f64.powf(rng.gen_range(-2.0..6.0))),
    }
}

#[test]
fn power_is_never_negative() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = f64::INFINITY;
    for i in 0..1_000_000u32 {
        let f = rng.gen_range(0.0..2e9);
        let p = match i % 3 {
            0 => {
                let mut s =
                    CableSetup::new(rng.gen_range(0.0..20.0), random_real_termination(&mut rng));
                s.cable.n = rng.gen_range(1.0..3.0);
                matched_source_power(&s, f).unwrap()
            }
            1 => {
                let mut s = SplitterSetup::new(
                    Arm {
                        length: rng.gen_range(0.0..5.0),
                        termination: random_real_termination(&mut rng),
                    },
                    Arm {
                        length: rng.gen_range(0.0..5.0),
                        termination: random_real_termination(&mut rng),
                    },
                    rng.gen_range(0.0..5.0),
                );
                s.source_impedance = random_real_termination(&mut rng);
                total_noise_power(&s, f).unwrap()
            }
            _ => {
                let m = LimitIndex::new(rng.gen_range(0..2), rng.gen_range(0..2)).unwrap();
                let (t3, t4) = m.terminations();
                let mut s = SplitterSetup::new(
                    Arm {
                        length: rng.gen_range(0.0..5.0),
                        termination: t3,
                    },
                    Arm {
                        length: rng.gen_range(0.0..5.0),
                        termination: t4,
                    },
                    rng.gen_range(0.0..5.0),
                );
                for (a, b) in [(1, 3), (1, 4), (2, 3), (2, 4)] {
                    s.splitter.set_tau_pair(a, b, rng.gen_range(0.0..20e-9));
                }
                limit_noise_power(&s, f, m)
            }
        };
        worst = worst.min(p);
    }
    assert!(worst >= 0.0, "minimum power {worst:e}");
}

fn cable_model(length: f64, n: f64) -> ModelParameters {
    let mut c = CableSetup::new(length, Termination::Short);
    c.cable.n = n;
    ModelParameters {
        network: NetworkModel::SingleCable(c),
        display: DisplayModel::SINGLE_CABLE_FIT,
    }
}

#[test]
fn only_the_index_length_product_is_identified() {
    let truth = cable_model(4.08, 1.60);
    let grid = FrequencyGrid::linear(1e6, 100e6, 2000).unwrap();
    let observed = model_spectrum(&truth, &grid).unwrap();
    let cfg = FitConfig::default();

    let length_free = FitProblem::new(
        observed.clone(),
        cable_model(4.08 * 1.03, 1.60),
        &[
            Parameter::LineLength,
            Parameter::Offset,
            Parameter::NoiseFloor,
        ],
    )
    .unwrap();
    let index_free = FitProblem::new(
        observed,
        cable_model(4.0, 1.60),
        &[Parameter::Index, Parameter::Offset, Parameter::NoiseFloor],
    )
    .unwrap();
    let a = fit(&length_free, &cfg).unwrap();
    let b = fit(&index_free, &cfg).unwrap();
    let nl_a = 1.60 * a.value(Parameter::LineLength).unwrap();
    let nl_b = 4.0 * b.value(Parameter::Index).unwrap();
    assert!(((nl_a - nl_b) / nl_a).abs() < 1e-3, "{nl_a} vs {nl_b}");
    assert!(((nl_a - 1.60 * 4.08) / nl_a).abs() < 1e-3);
}

#[test]
fn length_survives_display_noise() {
    let truth = cable_model(4.0, 1.60);
    let grid = FrequencyGrid::linear(1e6, 150e6, 1000).unwrap();
    let free = [
        Parameter::LineLength,
        Parameter::Offset,
        Parameter::NoiseFloor,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut within = 0;
    for trial in 0..50 {
        let observed = synth_spectrum(&truth, &grid, 0.05, trial).unwrap();
        let mut start = truth;
        for p in free {
            let v = p.get(&start).unwrap();
            p.set(&mut start, v * (1.0 + rng.gen_range(-0.05..0.05)))
                .unwrap();
        }
        let problem = FitProblem::new(observed, start, &free).unwrap();
        let r = fit(&problem, &FitConfig::default()).unwrap();
        assert!(r.rss <= r.initial_rss);
        if ((r.value(Parameter::LineLength).unwrap() - 4.0) / 4.0).abs() < 0.01 {
            within += 1;
        }
    }
    assert!(within >= 45, "{within}/50");
}

fn splitter_truth() -> ModelParameters {
    let setup = SplitterSetup::new(
        Arm {
            length: 0.98,
            termination: Termination::Open,
        },
        Arm {
            length: 3.98,
            termination: Termination::Short,
        },
        2.0,
    );
    ModelParameters {
        network: NetworkModel::SplitterLimit(setup, LimitIndex::from_setup(&setup).unwrap()),
        display: DisplayModel::SPLITTER_FIT,
    }
}

#[test]
fn splitter_arm_lengths_recovered() {
    let truth = splitter_truth();
    let grid = FrequencyGrid::linear(1e6, 100e6, 2000).unwrap();
    let observed = model_spectrum(&truth, &grid).unwrap();
    let free = [
        Parameter::ArmLength3,
        Parameter::ArmLength4,
        Parameter::Offset,
        Parameter::NoiseFloor,
    ];
    let mut start = truth;
    for (p, k) in free.iter().zip([1.02, 0.98, 1.03, 0.97]) {
        let v = p.get(&start).unwrap();
        p.set(&mut start, v * k).unwrap();
    }
    let r = fit(
        &FitProblem::new(observed, start, &free).unwrap(),
        &FitConfig::default(),
    )
    .unwrap();
    for p in free {
        let want = p.get(&truth).unwrap();
        let got = r.value(p).unwrap();
        assert!(((got - want) / want).abs() < 1e-3, "{p}: {got} vs {want}");
    }
}

#[test]
fn splitter_delays_recovered() {
    let truth = splitter_truth();
    let grid = FrequencyGrid::linear(1e6, 300e6, 3000).unwrap();
    let observed = model_spectrum(&truth, &grid).unwrap();
    // only tau14 - tau13 enters, so tau14 stays fixed
    let free = [Parameter::Tau23, Parameter::Tau24, Parameter::Tau13];
    let mut start = truth;
    for (p, k) in free.iter().zip([1.02, 0.98, 1.02]) {
        let v = p.get(&start).unwrap();
        p.set(&mut start, v * k).unwrap();
    }
    let r = fit(
        &FitProblem::new(observed, start, &free).unwrap(),
        &FitConfig::default(),
    )
    .unwrap();
    for p in free {
        let want = p.get(&truth).unwrap();
        let got = r.value(p).unwrap();
        assert!(((got - want) / want).abs() < 1e-3, "{p}: {got} vs {want}");
    }
}
