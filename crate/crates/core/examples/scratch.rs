// temporary exploration harness; removed before release
use pmflow::diagnostics::{energy_trace, staircase_report};
use pmflow::exponent::ExponentField;
use pmflow::flux::FluxModel;
use pmflow::io::{gen_signal, SignalKind};
use pmflow::rothe::{evolve, min_steps, RotheConfig};
use pmflow::viscosity::{window_average_gradient, young_measure, Window};

fn run(label: &str, f: &pmflow::ScalarField, delta: f64, exponent: ExponentField, t_final: f64, eps: f64) {
    let model = FluxModel::new(delta, exponent).unwrap();
    let m = min_steps(0.125, t_final, eps, eps / 2.0);
    let cfg = RotheConfig {
        t_final,
        m,
        epsilon: eps,
        gamma: eps / 2.0,
        newton_tol: 1e-10,
        newton_max_iter: 50,
    };
    let t0 = std::time::Instant::now();
    match evolve(f, &cfg, &model) {
        Ok(traj) => {
            let trace = energy_trace(&traj);
            let rep = staircase_report(traj.final_state(), traj.grid());
            let iters: usize = traj.stats().iter().map(|s| s.iterations).sum();
            println!(
                "{label}: m={m} E0={:.4} Em={:.4} min_margin={:.2e} drift={:.2e} signs={} maxg={:.2} width={:.2} newton_iters={} [{:.2}s]",
                trace.initial_energy(),
                trace.final_energy(),
                trace.min_margin(),
                trace.max_mean_drift(),
                rep.sign_change_count,
                rep.max_abs_gradient,
                rep.gradient_range_width,
                iters,
                t0.elapsed().as_secs_f64(),
            );
            // gradient sample stats in a mid window late in time
            let w = Window::span_1d(0.05, 0.45, t_final * 0.5, t_final);
            let trajs = vec![&traj];
            if let Ok(h) = young_measure(&trajs, &w) {
                let avg = window_average_gradient(&traj, &w).unwrap();
                println!(
                    "    window[0.05-0.45]: fm={:.3} avg={:.3} std={:.3}",
                    h.first_moment[0], avg[0], h.std_dev(0)
                );
            }
        }
        Err(e) => println!("{label}: FAILED {e}"),
    }
}

fn main() {
    let f = gen_signal(SignalKind::Sine, 256, 2.0, 0.05, 42);
    let rep0 = staircase_report(&f, f.grid());
    println!(
        "initial: signs={} maxg={:.2} width={:.2}",
        rep0.sign_change_count, rep0.max_abs_gradient, rep0.gradient_range_width
    );

    let g = f.grid();
    // fig1: pure PM
    run("fig1 pm   ", &f, 0.0, ExponentField::constant(2.0, g).unwrap(), 2.0, 0.01);
    // fig2: constant p=3
    run("fig2 p3   ", &f, 0.001, ExponentField::constant(3.0, g).unwrap(), 2.0, 0.01);
    // fig3 candidates: adaptive exponent
    for (sigma, k) in [(1.0, 10.0), (2.0, 1.0), (3.0, 0.1), (3.0, 0.01), (2.0, 0.005)] {
        let p = ExponentField::edge_adaptive(&f, sigma, k, 2.0, 3.0).unwrap();
        let pmin = p.p_minus();
        let pavg: f64 = p.values().iter().sum::<f64>() / p.values().len() as f64;
        run(
            &format!("fig3 s{sigma} k{k} (p- {pmin:.2} avg {pavg:.2})"),
            &f,
            0.001,
            p,
            2.0,
            0.01,
        );
    }
    // p=2 constant for comparison
    run("cmp p2    ", &f, 0.001, ExponentField::constant(2.0, g).unwrap(), 2.0, 0.01);
}
