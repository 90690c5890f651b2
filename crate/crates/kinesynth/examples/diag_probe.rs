// scratch diagnostics (deleted before release)
use kinesynth::data::LabelMode;
use kinesynth::signal::high_frequency_power_ratio;
use kinesynth::toy::make_toy_fixture;
use kinesynth::data::ChannelScaler;

fn main() {
    let ds = make_toy_fixture(20, 42);
    let mut hf = 0.0;
    for t in ds.trials() {
        hf += high_frequency_power_ratio(&t.signal, 60.0, 2.0).unwrap();
    }
    println!("real mean hf ratio: {:.5}", hf / ds.len() as f64);
    let scaler = ChannelScaler::fit(ds.trials());
    println!("scaler shift: {:?}", scaler.shift.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
    println!("scaler scale: {:?}", scaler.scale.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
    let _ = LabelMode::Task;
}
