//! Dev harness: measure software baselines and the hardware accuracy
//! surface to validate calibration defaults. Not part of the deliverable.

use fefet_sim::checkpoint::{load_checkpoint, save_checkpoint};
use fefet_sim::data::load_mnist_dir;
use fefet_sim::device::{GateStackId, GateStackParams, OperatingPoint};
use fefet_sim::experiments::{
    calibrate_adc, run_hw_inference, training_fraction_set, trial_seed, SensingMode,
};
use fefet_sim::network::{train, LossKind, MLPModel, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("all");

    let (train_set, test_set) = load_mnist_dir(std::path::Path::new("data/mnist")).unwrap();
    println!("mnist: {} train / {} test", train_set.len(), test_set.len());

    for levels in [2u8, 4] {
        if mode != "all" && mode != "train" && mode != &format!("train{levels}") && mode != "hw" {
            continue;
        }
        let params = GateStackParams::gs2();
        let fractions = training_fraction_set(&params, levels).unwrap();
        println!(
            "L={levels} fraction set: {:?}",
            fractions.iter().map(|f| format!("{f:.3e}")).collect::<Vec<_>>()
        );
        let cfg = TrainConfig {
            epochs: 30,
            batch_size: 64,
            learning_rate: 0.1,
            seed: 1,
            levels,
            fraction_set: fractions.clone(),
            loss: LossKind::CrossEntropySoftmax,
        };
        let ckpt = format!("/tmp/tune_L{levels}.fxckpt");
        let model = if std::path::Path::new(&ckpt).exists() && mode != "train" {
            let (m, _) = load_checkpoint(std::path::Path::new(&ckpt)).unwrap();
            println!("L={levels}: loaded checkpoint");
            m
        } else {
            let mut model = MLPModel::new(&[784, 200, 10], &cfg);
            let t0 = std::time::Instant::now();
            let hist = train(&mut model, &train_set, &test_set, &cfg).unwrap();
            let secs = t0.elapsed().as_secs_f64();
            println!(
                "L={levels}: trained in {secs:.0} s; final acc {:.4}; trajectory {:?}",
                hist.test_accuracy.last().unwrap(),
                hist.test_accuracy
                    .iter()
                    .map(|a| (a * 1e4).round() / 1e4)
                    .collect::<Vec<_>>()
            );
            save_checkpoint(&model, 30, std::path::Path::new(&ckpt)).unwrap();
            model
        };

        if mode == "train" || mode == "train2" || mode == "train4" {
            continue;
        }

        // hardware surface
        let noise_fracs: Vec<f64> = if let Some(nf) = args.get(2) {
            vec![nf.parse().unwrap()]
        } else {
            vec![0.0, 0.25]
        };
        for &nf in &noise_fracs {
            for stack in [GateStackId::GsII, GateStackId::GsI] {
                let params = GateStackParams::preset(stack);
                let quant = model.quantized_weights();
                for sensing in [SensingMode::Reference, SensingMode::Adjusted] {
                    println!("\n== L={levels} {stack} noise={nf} sensing={sensing:?} (3-trial means, adc 8-bit auto)");
                    print!("{:>6}", "vg\\T");
                    for t in [233.0, 300.0, 398.0] {
                        print!(" {t:>8}");
                    }
                    println!();
                    for vg in [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
                        let adc = calibrate_adc(
                            &quant,
                            &params,
                            &model.fraction_set,
                            levels,
                            vg,
                            0.1,
                            8,
                            &test_set.head(1000),
                        )
                        .unwrap();
                        print!("{vg:>6.1}");
                        for t in [233.0, 300.0, 398.0] {
                            let op = OperatingPoint::new(vg, 0.1, t).unwrap();
                            let mut acc = 0.0;
                            let trials = 3;
                            for trial in 0..trials {
                                acc += run_hw_inference(
                                    &quant,
                                    &params,
                                    &model.fraction_set,
                                    levels,
                                    &op,
                                    0.15,
                                    trial_seed(42, trial),
                                    Some(&adc),
                                    sensing,
                                    nf,
                                    &test_set,
                                )
                                .unwrap();
                            }
                            print!(" {:>8.4}", acc / trials as f64);
                        }
                        println!();
                    }
                }
            }
        }
    }
}
