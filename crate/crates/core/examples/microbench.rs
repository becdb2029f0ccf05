// probe 2: segmentation sensitivity to prior density and probability floor
use sparselets_core::imagecore::*;
use sparselets_core::loggabor::*;
use sparselets_core::priors::*;
use sparselets_core::pursuit::*;

fn precision(list: &EdgeList, radius: f64, n: usize, take: usize) -> f64 {
    let c = n as f64 / 2.0;
    let close = list.edges.iter().take(take)
        .filter(|e| ((e.x as f64 - c).hypot(e.y as f64 - c) - radius).abs() <= 3.0)
        .count();
    close as f64 / take.min(list.edges.len()) as f64
}

fn main() {
    let size = 128usize;
    let bank = LogGaborBank::build(BankParams::for_image_size(size), size).unwrap();
    let wp = WhiteningParams::for_size(size);
    let pp = PursuitParams { alpha: 0.8, max_edges: 512, energy_threshold: 0.0, ..Default::default() };
    let names: Vec<String> = std::fs::read_to_string("data/corpus/manifest.txt").unwrap()
        .lines().filter(|l| !l.starts_with('#') && !l.is_empty()).take(15).map(String::from).collect();
    let mut lists = Vec::new();
    for name in &names {
        let img = load_image(format!("data/corpus/{name}"), size).unwrap();
        let img = apply_circular_mask(&whiten(&img, &wp).unwrap());
        lists.push(extract(&img, &bank, &pp).unwrap());
    }
    let prior = chevron_stats(&lists, &ChevronBinning::default(), true).unwrap();
    let r3 = prior.ratio_psi_theta_d();
    let empty = r3.iter().filter(|&&r| r == 0.0).count();
    println!("prior: {} pairs, {}/{} empty (psi,theta,d) cells, max marginal {:.2}",
             prior.n_pairs, empty, r3.len(),
             prior.marginal_ratio().iter().cloned().fold(0.0, f64::max));

    for eps in [1e-3, 0.05, 0.2] {
        let mut wins = 0;
        let mut d0 = Vec::new();
        let mut d1 = Vec::new();
        for seed in 0..10u64 {
            let spec = SyntheticStimulusSpec { radius: 40.0, n_clutter: 90, clutter_scale_range: (1, 3), seed };
            let (img, planted) = circle_in_noise_with_ground_truth(&spec, &bank).unwrap();
            let n_circle = planted.len() - 90;
            let run = PursuitParams { alpha: 0.8, max_edges: n_circle, energy_threshold: 0.0, ..Default::default() };
            let plain = extract_with_prior(&img, &bank, &prior, &run, &CoocParams { eta: 0.0, epsilon_prob: eps, ..Default::default() }).unwrap();
            let guided = extract_with_prior(&img, &bank, &prior, &run, &CoocParams { eta: 0.15, epsilon_prob: eps, ..Default::default() }).unwrap();
            let p0 = precision(&plain, 40.0, size, n_circle);
            let p1 = precision(&guided, 40.0, size, n_circle);
            if p1 > p0 { wins += 1; }
            d0.push((p0 * 100.0) as i32);
            d1.push((p1 * 100.0) as i32);
        }
        println!("eps {eps}: wins {wins}/10  p0 {d0:?}  p1 {d1:?}");
    }
}
