// scratch tuning probe (deleted before release)
use kinesynth::cgan::{self, GanConfig};
use kinesynth::classifier::{predict, train_classifier, FcnConfig};
use kinesynth::data::LabelMode;
use kinesynth::signal::high_frequency_power_ratio;
use kinesynth::toy::make_toy_fixture;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(200);
    let lr_gen: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2e-4);
    let lr_disc: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(2e-4);
    let lambda: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let small = true;
    let ds = make_toy_fixture(20, 42);

    let fcn_cfg = FcnConfig { seed: 7, ..FcnConfig::toy() };
    let (oracle, _log) = train_classifier(&ds, LabelMode::Condition, &fcn_cfg).unwrap();
    let truth = ds.labels(LabelMode::Condition);

    let mut gan_cfg = GanConfig { epochs, lr_gen, lr_disc, lambda_spec: lambda, seed: 3, ..GanConfig::toy() };
    if small {
        gan_cfg.gen_filters = (16, 12);
        gan_cfg.disc_filters = (8, 16);
        gan_cfg.feature_dim = 24;
    }
    let t0 = Instant::now();
    let (model, tlog) = cgan::train(&ds, &gan_cfg).unwrap();
    let train_time = t0.elapsed().as_secs_f64();
    for snap in tlog.epochs.iter().step_by((epochs / 8).max(1)) {
        println!(
            "  ep {:4}: d {:.3} g_adv {:.3} g_spec {:.4} D(r) {:.3} D(f) {:.3} hf {:.4}",
            snap.epoch, snap.d_loss, snap.g_adv_loss, snap.g_spec_loss, snap.d_real_mean, snap.d_fake_mean,
            snap.probe_hf_ratio
        );
    }
    let last = tlog.epochs.last().unwrap();
    println!(
        "gan {} epochs ({:.1}s): d {:.3} g_adv {:.3} D(f) {:.3} hf {:.4}",
        epochs, train_time, last.d_loss, last.g_adv_loss, last.d_fake_mean, last.probe_hf_ratio
    );

    let mut correct = 0;
    let mut total = 0;
    for class in 0..3 {
        let gens = cgan::generate(&model, class, 20, 1000 + class as u64, true).unwrap();
        let (preds, _) = predict(&oracle, &gens).unwrap();
        correct += preds.iter().filter(|&&p| p == class).count();
        total += preds.len();
    }
    println!("conditioning accuracy: {:.3}", correct as f64 / total as f64);

    let gens = cgan::generate(&model, 0, 32, 5, true).unwrap();
    let pairwise = |sigs: &[&kinesynth::numerics::Tensor]| -> f64 {
        let mut sum = 0.0;
        let mut n = 0;
        for i in 0..sigs.len() {
            for j in i + 1..sigs.len() {
                let d: f64 = sigs[i].data().iter().zip(sigs[j].data()).map(|(a, b)| (a - b) * (a - b)).sum();
                sum += d.sqrt();
                n += 1;
            }
        }
        sum / n as f64
    };
    let fake_sigs: Vec<_> = gens.iter().map(|t| &t.signal).collect();
    let real_sigs: Vec<_> =
        ds.trials().iter().enumerate().filter(|(i, _)| truth[*i] == 0).map(|(_, t)| &t.signal).collect();
    println!("diversity ratio: {:.3}", pairwise(&fake_sigs) / pairwise(&real_sigs));

    let raw = cgan::generate(&model, 0, 8, 6, false).unwrap();
    let hf: f64 =
        raw.iter().map(|t| high_frequency_power_ratio(&t.signal, 60.0, 2.0).unwrap()).sum::<f64>() / raw.len() as f64;
    println!("unfiltered hf ratio: {hf:.4}");
}
