use hlkit::localdata::count_m;
use hlkit::sysmodel::DiagonalSystem;
use std::time::Instant;

fn main() {
    let sys = DiagonalSystem::new(vec![vec![1], vec![1], vec![-1], vec![-1]], vec![1]).unwrap();
    for q in [97u64*97, 89*89, 19*19*19, 997, 991] {
        let t0 = Instant::now();
        let m = count_m(&sys, q).unwrap();
        println!("M({q}) = {m}  in {:?}", t0.elapsed());
    }
}
