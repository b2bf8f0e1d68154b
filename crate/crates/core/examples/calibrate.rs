// Scratch calibration: stop index / gap / value vs (theta, lr, min_leaf, n).
use adtune::budget::BudgetLedger;
use adtune::capacity::CapacityFunction;
use adtune::gbdt::{boosted_ad, fit_ensemble, GbdtConfig};
use adtune::loss::cross_entropy;
use adtune::rng::Rng;
use adtune::sim::{Task, XorTask};

fn main() {
    let task = XorTask::default();
    let mut ledger = BudgetLedger::new();
    for &lr in &[0.1, 0.2, 0.3] {
        for &leaf in &[8usize, 32] {
            for &theta in &[0.2, 0.5, 0.8, 1.1, 1.4] {
                for &n in &[1024usize, 4096] {
                    for (name, cap) in [
                        ("lin", CapacityFunction::linear(0.25, 100).unwrap()),
                        ("log", CapacityFunction::logarithmic(0.25, 100).unwrap()),
                    ] {
                        let cfg = GbdtConfig {
                            n_trees: 100,
                            max_depth: 3,
                            shrinkage: lr,
                            min_leaf: leaf,
                            capacity: cap,
                        };
                        let mut rng = Rng::new(17);
                        let tp = task.ground_truth(n, &mut rng.split(), &mut ledger).unwrap();
                        let tq = task.sample(&[theta], n, &mut rng.split(), &mut ledger).unwrap();
                        let vp = task.ground_truth(n, &mut rng.split(), &mut ledger).unwrap();
                        let vq = task.sample(&[theta], n, &mut rng.split(), &mut ledger).unwrap();
                        let fit = boosted_ad(&tp, &tq, &vp, &vq, &cfg).unwrap();
                        let full = fit_ensemble(&tp, &tq, &cfg).unwrap();
                        let jtrain = cross_entropy(&full, &tp, &tq).unwrap();
                        let jvalid = cross_entropy(&full, &vp, &vq).unwrap();
                        println!(
                            "lr={lr} leaf={leaf} th={theta} n={n} {name}: stop={:<3} gap={:+.4} value={:.3} | jsd gap={:+.4} value={:.3}",
                            fit.stop_index,
                            fit.train_loss - fit.valid_loss,
                            fit.value(),
                            jtrain - jvalid,
                            std::f64::consts::LN_2 - jvalid
                        );
                    }
                }
            }
        }
    }
}
