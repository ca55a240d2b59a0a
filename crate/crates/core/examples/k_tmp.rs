use rand::{Rng, SeedableRng};
use regrade::gridmap::HeightMap;
use regrade::kinem::*;
use regrade::triplets::Pose;
fn main() {
    let map = HeightMap::flat(100, 100, 0.05, (0.025, 0.025), 0.0).unwrap();
    let set = generate_primitives(&[0.5, 1.0, f64::INFINITY], 0.2, 32, 0.5).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let t = std::time::Instant::now();
    let mut fails = 0;
    for _ in 0..100 {
        let mut p = || Pose { x: rng.gen_range(0.5..4.5), y: rng.gen_range(0.5..4.5), heading: rng.gen_range(-3.14..3.14) };
        let s = p(); let g = p();
        let s = Pose{heading: (s.heading/ (std::f64::consts::TAU/32.0)).round()*(std::f64::consts::TAU/32.0), ..s};
        let t1 = std::time::Instant::now();
        match plan_path(&map, &set, &s, &g, &PlannerConfig::default()) { Ok(tr) => { if t1.elapsed().as_millis() > 300 {println!("slow {:?} len {}", t1.elapsed(), tr.len());} }, Err(e) => { fails += 1; println!("{e} {:?} {:?}", s, g); } }
    }
    println!("fails {fails} in {:?}", t.elapsed());
}
