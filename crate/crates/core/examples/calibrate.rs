use std::time::Instant;

use fairev::*;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("all");

    if which == "solver" || which == "all" {
        let s = 30;
        let a = payoff_matrix_independent(s).unwrap();
        for u in [0.01, 0.05, 0.1, 0.2, 0.5] {
            let t0 = Instant::now();
            let config = SolverConfig { tol: 1e-10, max_steps: 2_000_000, damping: 0.5 };
            match solve_stationary(&a, Layout::Independent { s }, u, &config) {
                Ok(res) => {
                    let (o, d) = res.distribution.mean_offer_demand();
                    println!(
                        "indep s=30 u={u}: offer={o:.5} demand={d:.5} steps={} newton={} res={:.1e} t={:.1?}",
                        res.steps, res.newton_steps, res.residual, t0.elapsed()
                    );
                }
                Err(e) => println!("indep s=30 u={u}: FAILED {e}"),
            }
        }
        let s = 100;
        let a = payoff_matrix_empathetic(s).unwrap();
        for u in [0.01, 0.2, 0.5] {
            let t0 = Instant::now();
            let config = SolverConfig::default();
            let res = solve_stationary(&a, Layout::Empathetic { s }, u, &config).unwrap();
            let (o, _) = res.distribution.mean_offer_demand();
            println!(
                "emp s=100 u={u}: offer={o:.5} steps={} newton={} t={:.1?}",
                res.steps, res.newton_steps, t0.elapsed()
            );
        }
    }

    if which == "sim" || which == "all" {
        // Generation throughput at the two workload shapes that matter.
        let mut p = SimParams {
            n: 50,
            m: 9,
            u: 0.1,
            v: 0.1,
            alpha: 1.0,
            omega: 0.001,
            pattern: MigrationPattern::Global,
            generations: 2_000_000,
            burn_in: 200_000,
            sample_every: 1,
            seed: 7,
            exclude_reproducer_from_death: false,
            record_series: false,
        };
        let t0 = Instant::now();
        let m = run_simulation(&p).unwrap();
        println!(
            "sim n=50 m=9 2e6 gens: offer={:.5} se={:.2e} t={:.1?}",
            m.mean_offer,
            m.offer_std_err.unwrap(),
            t0.elapsed()
        );

        p.n = 100;
        let t0 = Instant::now();
        let m = run_simulation(&p).unwrap();
        println!(
            "sim n=100 m=9 2e6 gens: offer={:.5} se={:.2e} t={:.1?}",
            m.mean_offer,
            m.offer_std_err.unwrap(),
            t0.elapsed()
        );

        p.n = 100;
        p.m = 1;
        p.omega = 1.0;
        p.alpha = 0.0;
        p.generations = 1_000_000;
        p.burn_in = 100_000;
        let t0 = Instant::now();
        let m = run_simulation(&p).unwrap();
        println!(
            "sim n=100 m=1 omega=1 1e6 gens: offer={:.5} demand={:.5} se={:.2e} t={:.1?}",
            m.mean_offer,
            m.mean_demand,
            m.offer_std_err.unwrap(),
            t0.elapsed()
        );
    }
}
