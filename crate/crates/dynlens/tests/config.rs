use dynlens::config::{Preset, RunConfig};
use proptest::prelude::*;

fn preset() -> impl Strategy<Value = Preset> {
    prop::sample::select(vec![Preset::DisparityDynamic, Preset::DisparityMonovision, Preset::FuseDynamic, Preset::FuseMonovision])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parse_serialize_parse_is_identity(
        p in preset(),
        seed in any::<u64>(),
        screen in 0.3f64..5.0,
        sigma0 in 0.05f64..5.0,
        k_blur in 0.0f64..1.0,
        subjects in 1u32..40,
        levels in prop::collection::vec(0.0f64..8.0, 3..8),
        hit in 0.0f64..=1.0,
        samples in 10_000usize..200_000,
        t in 0.0f64..10.0,
    ) {
        let mut c = RunConfig::preset(p);
        c.seed = seed;
        c.geometry.screen_distance_m = screen;
        c.observer.sigma0_arcmin = sigma0;
        c.observer.k_blur = k_blur;
        c.subjects = subjects;
        let mut levels = levels;
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        prop_assume!(levels.len() >= 2);
        c.disparity.levels_arcmin = levels;
        c.gaze.model.hit_fraction = hit;
        c.gaze.scene.samples = samples;
        c.render.t_s = t;
        prop_assume!(c.validate().is_ok());
        let text = c.to_ini_string();
        let back = RunConfig::from_ini_str(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_ini_string(), text);
    }
}

#[test]
fn sparse_file_fills_defaults() {
    let c = RunConfig::from_ini_str("# only the seed\n[run]\nseed = 42\n").unwrap();
    let mut d = RunConfig::default();
    d.seed = 42;
    assert_eq!(c, d);
}
