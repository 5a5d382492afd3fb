use proptest::prelude::*;

use subnetpc::baselines::{wmmse, WmmseConfig};
use subnetpc::channel::{derive_seed, sample_snapshot, sum_se, sum_se_gradient};
use subnetpc::eval::pcgnn_allocations;
use subnetpc::graph::build_graph;
use subnetpc::io::{load_dataset, save_dataset};
use subnetpc::{Architecture, Dataset, Model, Normalizer, PcgnnModel, SeedDomain, SystemConfig, Variant};

fn config(n: usize, lambda: f64, seed: u64) -> SystemConfig {
    SystemConfig {
        n_subnetworks: n,
        shadowing_std_db: lambda,
        master_seed: seed,
        ..SystemConfig::default()
    }
}

fn model(variant: Variant, cfg: &SystemConfig, seed: u64) -> Model {
    let ds = Dataset::generate(cfg, SeedDomain::Custom(seed), 8).unwrap();
    let raw: Vec<_> = ds.snapshots.iter().map(|s| build_graph(s, variant)).collect();
    let norm = Normalizer::fit(&raw, cfg.area_side).unwrap();
    PcgnnModel::new(Architecture::default(), norm, cfg.max_power, seed).unwrap()
}

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::HD), Just(Variant::DD), Just(Variant::HH)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn outputs_follow_relabelling(
        order in (2usize..25).prop_flat_map(|n| Just((0..n).collect::<Vec<_>>()).prop_shuffle()),
        seed in any::<u64>(),
        v in variant(),
    ) {
        let cfg = config(order.len(), 7.0, 0);
        let s = sample_snapshot(&cfg, seed).unwrap();
        let m = model(v, &cfg, seed % 1000);
        let out = pcgnn_allocations(&m, std::slice::from_ref(&s)).unwrap();
        let pout = pcgnn_allocations(&m, &[s.permuted(&order)]).unwrap();
        let expected: Vec<f64> = order.iter().map(|&p| out[0].powers()[p]).collect();
        prop_assert_eq!(pout[0].powers(), expected.as_slice());
    }

    #[test]
    fn model_powers_are_feasible(n in 1usize..30, lambda in 0.0f64..12.0, seed in 0u64..10_000, v in variant()) {
        let cfg = config(n, lambda, seed);
        let ds = Dataset::generate(&cfg, SeedDomain::Test, 4).unwrap();
        for a in pcgnn_allocations(&model(v, &cfg, seed), &ds.snapshots).unwrap() {
            prop_assert!(a.powers().iter().all(|&p| (0.0..=cfg.max_power).contains(&p)));
        }
    }

    #[test]
    fn wmmse_never_loses_rate(n in 1usize..12, seed in any::<u64>(), lambda in 0.0f64..12.0) {
        let cfg = config(n, lambda, 0);
        let s = sample_snapshot(&cfg, seed).unwrap();
        let out = wmmse(&s.channel, cfg.noise_power(), cfg.max_power, WmmseConfig::default()).unwrap();
        for w in out.trajectory().windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
        prop_assert!(out.allocation.powers().iter().all(|&p| (0.0..=cfg.max_power).contains(&p)));
        prop_assert!((out.sum_se() - sum_se(out.allocation.powers(), &s.channel, cfg.noise_power())).abs() < 1e-9);
    }

    #[test]
    fn rate_gradient_matches_differences(n in 1usize..8, seed in any::<u64>(), frac in 0.05f64..0.95) {
        let cfg = config(n, 7.0, 0);
        let s = sample_snapshot(&cfg, seed).unwrap();
        let noise = cfg.noise_power();
        let p: Vec<f64> = (0..n).map(|i| cfg.max_power * (frac + 0.003 * i as f64).min(1.0)).collect();
        let g = sum_se_gradient(&p, &s.channel, noise);
        let scale = g.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for i in 0..n {
            let h = 1e-7 * cfg.max_power;
            let (mut up, mut down) = (p.clone(), p.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (sum_se(&up, &s.channel, noise) - sum_se(&down, &s.channel, noise)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-5 * scale.max(g[i].abs()));
        }
    }

    #[test]
    fn snapshots_regenerate_from_their_index(seed in any::<u64>(), index in 0u64..64) {
        let cfg = config(6, 7.0, seed);
        let ds = Dataset::generate(&cfg, SeedDomain::Train, 64).unwrap();
        let again = sample_snapshot(&cfg, derive_seed(seed, SeedDomain::Train, index)).unwrap();
        prop_assert_eq!(&ds.snapshots[index as usize], &again);
        prop_assert_ne!(derive_seed(seed, SeedDomain::Train, index), derive_seed(seed, SeedDomain::Test, index));
    }
}

#[test]
fn dataset_survives_disk_round_trip() {
    let cfg = config(5, 9.0, 17);
    let ds = Dataset::generate(&cfg, SeedDomain::Test, 10).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path(), false).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back.config, ds.config);
    assert_eq!(back.domain, ds.domain);
    assert_eq!(back.snapshots, ds.snapshots);
}

#[test]
fn train_and_test_sets_are_disjoint() {
    let cfg = config(4, 7.0, 3);
    let train = Dataset::generate(&cfg, SeedDomain::Train, 200).unwrap();
    let test = Dataset::generate(&cfg, SeedDomain::Test, 200).unwrap();
    let seeds: std::collections::HashSet<u64> = train.snapshots.iter().map(|s| s.seed).collect();
    assert!(test.snapshots.iter().all(|s| !seeds.contains(&s.seed)));
}
