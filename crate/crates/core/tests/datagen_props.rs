mod common;

use std::collections::HashMap;

use common::blocked_by_any;
use proptest::prelude::*;
use raychannel::channel::AugmentSpec;
use raychannel::datagen::{generate_from_links, read_dataset_rows, split_spatial, write_dataset, Dataset, Split};
use raychannel::scene::{make_cabin_scene, Scene};
use raychannel::tracer::{trace_all, LinkResult, LosState};
use raychannel::{Label, Parallelism};

struct Fixture {
    scene: Scene,
    links: Vec<LinkResult>,
}

fn fixture() -> &'static Fixture {
    static F: std::sync::OnceLock<Fixture> = std::sync::OnceLock::new();
    F.get_or_init(|| {
        let scene = make_cabin_scene(10.0, 3.0, 2.0, 3, 0).unwrap();
        let links = trace_all(&scene, Parallelism::Auto).unwrap();
        Fixture { scene, links }
    })
}

fn dataset(spec: &AugmentSpec) -> Dataset {
    let f = fixture();
    generate_from_links(&f.scene, &f.links, spec, Parallelism::Auto).unwrap()
}

#[test]
fn row_count_identity_and_label_oracle() {
    let f = fixture();
    let spec = AugmentSpec::sweep(2, 4);
    let ds = dataset(&spec);
    let live = f.links.iter().filter(|l| l.los_state != LosState::Dead).count();
    assert_eq!(ds.meta.dead_links, f.links.len() - live);
    assert_eq!(ds.meta.uninformative_samples, 0);
    assert_eq!(ds.rows.len(), live * 2 * 3);

    let facets = &f.scene.desc().facets;
    for row in &ds.rows {
        let visible = !blocked_by_any(f.scene.tx(), row.features.position, facets, &[]);
        let expected = if visible { Label::Los } else { Label::Nlos };
        assert_eq!(row.features.label, expected, "row at {:?}", row.features.position);
        assert!(row.features.values().iter().all(|v| v.is_finite()));
    }
    // Canonical order: link, then replica, then bandwidth.
    let keys: Vec<(u32, u32, usize)> = ds
        .rows
        .iter()
        .map(|r| {
            let bw = spec.bandwidth_set_hz.iter().position(|b| *b == r.bandwidth_hz).unwrap();
            (r.features.link_index, r.replica, bw)
        })
        .collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn generation_ignores_worker_count() {
    let f = fixture();
    let spec = AugmentSpec::sweep(2, 8);
    let a = generate_from_links(&f.scene, &f.links, &spec, Parallelism::Sequential).unwrap();
    for par in [Parallelism::Auto, Parallelism::threads(3)] {
        assert_eq!(generate_from_links(&f.scene, &f.links, &spec, par).unwrap(), a);
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let ds = split_spatial(&dataset(&AugmentSpec::sweep(1, 2)), 0.3, 1.0, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    write_dataset(&ds, &path).unwrap();
    let back = read_dataset_rows(&path).unwrap();
    assert_eq!(back.len(), ds.rows.len());
    // Delays are stored in nanoseconds, so the seconds fields come back
    // within an ulp or two; everything else is exact.
    let ulps = |a: f64, b: f64| (a.to_bits() as i64 - b.to_bits() as i64).abs();
    for (r, o) in back.iter().zip(&ds.rows) {
        assert!(ulps(r.features.mean_excess_delay_s, o.features.mean_excess_delay_s) <= 2);
        assert!(ulps(r.features.rms_delay_spread_s, o.features.rms_delay_spread_s) <= 2);
        assert!(ulps(r.features.tof_s, o.features.tof_s) <= 2);
        let mut r = r.clone();
        r.features.mean_excess_delay_s = o.features.mean_excess_delay_s;
        r.features.rms_delay_spread_s = o.features.rms_delay_spread_s;
        r.features.tof_s = o.features.tof_s;
        assert_eq!(&r, o);
    }
    let first = std::fs::read(&path).unwrap();
    write_dataset(&ds, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn split_depends_only_on_position_and_seed(seed in any::<u64>(), frac in 0.2..0.6f64, block in 0.5..2.0f64, rot in 0usize..5000) {
        static BASE: std::sync::OnceLock<Dataset> = std::sync::OnceLock::new();
        let base = BASE.get_or_init(|| dataset(&AugmentSpec::sweep(2, 1)));
        let Ok(a) = split_spatial(base, frac, block, seed) else { return Ok(()) };

        let mut shuffled = base.clone();
        let k = rot % shuffled.rows.len();
        shuffled.rows.rotate_left(k);
        shuffled.rows.reverse();
        let b = split_spatial(&shuffled, frac, block, seed).unwrap();
        let side = |ds: &Dataset| -> HashMap<(u32, u32, u64), Split> {
            ds.rows.iter().map(|r| ((r.features.link_index, r.replica, r.bandwidth_hz.to_bits()), r.split)).collect()
        };
        prop_assert_eq!(side(&a), side(&b));

        let mut by_link: HashMap<u32, Split> = HashMap::new();
        for r in &a.rows {
            let s = *by_link.entry(r.features.link_index).or_insert(r.split);
            prop_assert_eq!(s, r.split);
        }
    }
}
