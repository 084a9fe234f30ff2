use kronweb::pencil::{synthesize_pencil, BlockStructure, Eigenvalue};
use kronweb::rat::GRat;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn random_structure(rng: &mut ChaCha8Rng, budget_max: usize) -> BlockStructure {
    let mut budget = budget_max;
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut jordan: Vec<(Eigenvalue, Vec<usize>)> = Vec::new();
    let mut evs: Vec<Eigenvalue> = vec![Eigenvalue::Infinity];
    for v in [-2i64, 0, 1, 3] {
        evs.push(Eigenvalue::Finite(GRat::from_i64(v)));
    }
    while budget > 0 {
        match rng.gen_range(0..4) {
            0 => { let k = rng.gen_range(1..=budget.min(3)); plus.push(k); budget -= k; }
            1 => { let k = rng.gen_range(1..=budget.min(3));
                   if k + 1 <= budget { minus.push(k); budget -= k + 1; } else { break; } }
            _ => { let k = rng.gen_range(1..=budget.min(4));
                   let ev = evs[rng.gen_range(0..evs.len())].clone();
                   match jordan.iter_mut().find(|(e, _)| *e == ev) {
                       Some((_, sizes)) => sizes.push(k),
                       None => jordan.push((ev, vec![k])),
                   }
                   budget -= k; }
        }
    }
    BlockStructure::new(plus, minus, jordan)
}

#[test]
fn probe() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc1);
    let mut slow: Vec<(usize, f64, String)> = Vec::new();
    for case in 0..500 {
        let spec = random_structure(&mut rng, 9);
        let p = synthesize_pencil(&spec, rng.gen());
        let t = Instant::now();
        let got = p.block_structure();
        let dt = t.elapsed().as_secs_f64();
        if got != spec {
            println!("FAIL case {}: {:?}", case, spec);
        }
        if dt > 0.1 {
            slow.push((case, dt, format!("{:?}", spec)));
        }
    }
    slow.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    for (c, dt, s) in slow.iter().take(12) {
        println!("slow case {}: {:.3}s {}", c, dt, s);
    }
    println!("slow cases total: {}, sum {:.2}s", slow.len(), slow.iter().map(|x| x.1).sum::<f64>());
}
