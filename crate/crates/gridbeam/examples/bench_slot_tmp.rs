use gridbeam::sdp::slot::{build_slot_program_raw, SinrMode, SlotChannel};
use gridbeam::sdp::{solve_slot_sdp, IpmSettings, SlotStatus};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() {
    let mut rng = StdRng::seed_from_u64(3);
    // C1-sized slot: I=2, M=2 (n=4), K=10
    let n = 4;
    let users = 10;
    let channels: Vec<SlotChannel> = (0..users)
        .map(|_| SlotChannel {
            h_hat: (0..n)
                .map(|_| {
                    Complex64::new(
                        rng.gen_range(-1.0..1.0_f64) * 0.707,
                        rng.gen_range(-1.0..1.0_f64) * 0.707,
                    )
                })
                .collect(),
            eps_sq: 0.01,
            sigma2: 1.0,
            gamma: 0.1,
        })
        .collect();
    let diag = vec![
        vec![1.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 1.0],
    ];
    let caps = vec![40.0, 35.0];
    let t0 = std::time::Instant::now();
    let reps = 20;
    let mut iters = 0;
    for r in 0..reps {
        let w = vec![0.5 + 0.01 * r as f64, 0.6];
        let prog = build_slot_program_raw(n, channels.clone(), diag.clone(), caps.clone(), w, SinrMode::Robust);
        let sol = solve_slot_sdp(&prog, &IpmSettings::default());
        assert_eq!(sol.status, SlotStatus::Optimal, "{:?}", sol.status);
        iters += sol.iterations;
    }
    let el = t0.elapsed();
    println!("C1 slot solve: {:.1} ms avg, {:.1} ipm iters avg", el.as_secs_f64()*1000.0/reps as f64, iters as f64/reps as f64);

    // C2-sized slot: I=6, M=2 (n=12), K=20
    let n = 12;
    let users = 20;
    let channels: Vec<SlotChannel> = (0..users)
        .map(|_| SlotChannel {
            h_hat: (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0_f64)*0.707, rng.gen_range(-1.0..1.0_f64)*0.707))
                .collect(),
            eps_sq: 0.01,
            sigma2: 1.0,
            gamma: 0.1,
        })
        .collect();
    let diag: Vec<Vec<f64>> = (0..6)
        .map(|i| (0..n).map(|p| if p / 2 == i { 1.0 } else { 0.0 }).collect())
        .collect();
    let caps = vec![40.0, 35.0, 35.0, 35.0, 40.0, 35.0];
    let t0 = std::time::Instant::now();
    let prog = build_slot_program_raw(n, channels, diag, caps, vec![0.7; 6], SinrMode::Robust);
    let sol = solve_slot_sdp(&prog, &IpmSettings::default());
    println!("C2 slot solve: {:.2} s, {} ipm iters, status {:?}", t0.elapsed().as_secs_f64(), sol.iterations, sol.status);
}
