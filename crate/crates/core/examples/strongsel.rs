use std::time::Instant;

use fairev::*;

fn main() {
    for (n, u, seed, gens) in [
        (100usize, 0.1f64, 1u64, 8_000_000u64),
        (100, 0.1, 2, 8_000_000),
        (100, 0.3, 1, 8_000_000),
        (100, 0.3, 2, 8_000_000),
        (400, 0.1, 1, 4_000_000),
        (40, 0.1, 1, 8_000_000),
    ] {
        let p = SimParams {
            n,
            m: 1,
            u,
            v: 0.0,
            alpha: 0.0,
            omega: 1.0,
            pattern: MigrationPattern::Global,
            generations: gens,
            burn_in: gens / 10,
            sample_every: 10,
            seed,
            exclude_reproducer_from_death: false,
            record_series: false,
        };
        let t0 = Instant::now();
        let m = run_simulation(&p).unwrap();
        println!(
            "n={n} u={u} seed={seed} gens={gens}: offer={:.5} (se {:.2e}) demand={:.5} (se {:.2e}) t={:.0?}",
            m.mean_offer,
            m.offer_std_err.unwrap(),
            m.mean_demand,
            m.demand_std_err.unwrap(),
            t0.elapsed()
        );
    }
}
