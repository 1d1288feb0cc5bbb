//! Central finite-difference check of both adversarial losses on small
//! randomly shaped generator/discriminator pairs.

use intent_gan::nn::{Matrix, Mlp, MlpSpec, Mode};
use intent_gan::rng::Rng;
use intent_gan::ssgan::{d_loss_with_input, g_loss_with_input, Discriminator, Generator};

pub const H: f64 = 1e-4;
pub const TOL: f64 = 1e-4;

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.standard_normal()).collect();
    Matrix::new(rows, cols, data).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Signs of every hidden pre-activation, to detect when a perturbation
/// crosses the leaky-ReLU kink.
fn kink_pattern(mlp: &Mlp, x: &Matrix, mode: Mode, rng: &Rng) -> Vec<bool> {
    let cache = mlp.forward(x, mode, &mut rng.clone()).unwrap();
    let hidden = &cache.pre[..cache.pre.len() - 1];
    hidden
        .iter()
        .flat_map(|m| m.as_slice().iter().map(|&z| z > 0.0))
        .collect()
}

struct Case {
    gen: Generator,
    disc: Discriminator,
    labeled: Matrix,
    labels: Vec<usize>,
    unlabeled: Matrix,
    fake: Matrix,
    noise: Matrix,
    real_mean: Vec<f64>,
}

fn random_case(seed: u64, dropout: f64) -> Case {
    let mut rng = Rng::new(seed);
    let d = 2 + rng.below(7);
    let k = 2 + rng.below(3);
    let g_hidden = 2 + rng.below(7);
    let d_hidden = 2 + rng.below(7);
    let noise_dim = 2 + rng.below(4);
    let gen = Generator {
        mlp: Mlp::init(
            &MlpSpec::new(vec![noise_dim, g_hidden, d], dropout),
            &mut rng,
        )
        .unwrap(),
    };
    let disc = Discriminator {
        mlp: Mlp::init(&MlpSpec::new(vec![d, d_hidden, k + 1], dropout), &mut rng).unwrap(),
    };
    let n_lab = 1 + rng.below(3);
    let labels = (0..n_lab).map(|_| rng.below(k)).collect();
    Case {
        labeled: random_matrix(n_lab, d, &mut rng),
        labels,
        unlabeled: random_matrix(1 + rng.below(3), d, &mut rng),
        fake: random_matrix(1 + rng.below(3), d, &mut rng),
        noise: random_matrix(1 + rng.below(4), noise_dim, &mut rng),
        real_mean: (0..d_hidden).map(|_| rng.uniform()).collect(),
        gen,
        disc,
    }
}

/// Returns (checked, skipped, worst relative error).
fn check<F, K>(analytic: &[f64], values: &mut [f64], mut loss: F, kinks: K) -> (usize, usize, f64)
where
    F: FnMut(&[f64]) -> f64,
    K: Fn(&[f64]) -> Vec<bool>,
{
    let (mut checked, mut skipped, mut worst) = (0, 0, 0.0f64);
    for i in 0..values.len() {
        let orig = values[i];
        values[i] = orig + H;
        let (plus, kp) = (loss(values), kinks(values));
        values[i] = orig - H;
        let (minus, km) = (loss(values), kinks(values));
        values[i] = orig;
        if kp != km {
            skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * H);
        worst = worst.max(rel_err(analytic[i], numeric));
        checked += 1;
    }
    (checked, skipped, worst)
}

fn d_case(c: &Case, mode: Mode, mask_rng: &Rng, tally: &mut Tally) -> f64 {
    let (parts, grads) = d_loss_with_input(
        &c.disc,
        &c.labeled,
        &c.labels,
        &c.unlabeled,
        &c.fake,
        mode,
        &mut mask_rng.clone(),
    )
    .unwrap();
    let stacked = c
        .labeled
        .vstack(&c.unlabeled)
        .unwrap()
        .vstack(&c.fake)
        .unwrap();
    let loss_with = |disc: &Discriminator, x: &Matrix| {
        let n = c.labels.len();
        let nu = c.unlabeled.rows();
        let labeled = x.select_rows(&(0..n).collect::<Vec<_>>());
        let unlabeled = x.select_rows(&(n..n + nu).collect::<Vec<_>>());
        let fake = x.select_rows(&(n + nu..x.rows()).collect::<Vec<_>>());
        d_loss_with_input(
            disc,
            &labeled,
            &c.labels,
            &unlabeled,
            &fake,
            mode,
            &mut mask_rng.clone(),
        )
        .unwrap()
        .0
        .total()
    };
    assert!((parts.total() - loss_with(&c.disc, &stacked)).abs() < 1e-15);
    let mut worst = 0.0f64;

    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
    for (p, a) in analytic.iter().enumerate() {
        let mut disc = c.disc.clone();
        let mut values = disc.mlp.param_slices()[p].to_vec();
        let (n, s, w) = check(
            a,
            &mut values,
            |v| {
                disc.mlp.params_mut()[p].copy_from_slice(v);
                loss_with(&disc, &stacked)
            },
            |v| {
                let mut d2 = c.disc.clone();
                d2.mlp.params_mut()[p].copy_from_slice(v);
                kink_pattern(&d2.mlp, &stacked, mode, mask_rng)
            },
        );
        worst = worst.max(w);
        tally.add(n, s);
    }

    let input = grads.input.expect("input gradient");
    let mut x = stacked.clone();
    let mut values = x.as_slice().to_vec();
    let (n, s, w) = check(
        input.as_slice(),
        &mut values,
        |v| {
            x.as_mut_slice().copy_from_slice(v);
            loss_with(&c.disc, &x)
        },
        |v| {
            let m = Matrix::new(stacked.rows(), stacked.cols(), v.to_vec()).unwrap();
            kink_pattern(&c.disc.mlp, &m, mode, mask_rng)
        },
    );
    tally.add(n, s);
    worst.max(w)
}

fn g_case(c: &Case, mode: Mode, mask_rng: &Rng, tally: &mut Tally) -> f64 {
    let loss_with = |gen: &Generator, noise: &Matrix| {
        g_loss_with_input(
            &c.disc,
            gen,
            &c.real_mean,
            noise,
            mode,
            &mut mask_rng.clone(),
        )
        .unwrap()
        .0
        .total()
    };
    let kinks = |gen: &Generator, noise: &Matrix| {
        let mut r = mask_rng.clone();
        let gc = gen.mlp.forward(noise, mode, &mut r).unwrap();
        let dc = c.disc.mlp.forward(gc.output(), mode, &mut r).unwrap();
        let mut out: Vec<bool> = gc.pre[0].as_slice().iter().map(|&z| z > 0.0).collect();
        out.extend(dc.pre[0].as_slice().iter().map(|&z| z > 0.0));
        out
    };
    let (_, grads) = g_loss_with_input(
        &c.disc,
        &c.gen,
        &c.real_mean,
        &c.noise,
        mode,
        &mut mask_rng.clone(),
    )
    .unwrap();
    let mut worst = 0.0f64;
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
    for (p, a) in analytic.iter().enumerate() {
        let mut gen = c.gen.clone();
        let mut values = gen.mlp.param_slices()[p].to_vec();
        let (n, s, w) = check(
            a,
            &mut values,
            |v| {
                gen.mlp.params_mut()[p].copy_from_slice(v);
                loss_with(&gen, &c.noise)
            },
            |v| {
                let mut g2 = c.gen.clone();
                g2.mlp.params_mut()[p].copy_from_slice(v);
                kinks(&g2, &c.noise)
            },
        );
        worst = worst.max(w);
        tally.add(n, s);
    }
    let input = grads.input.expect("noise gradient");
    let mut z = c.noise.clone();
    let mut values = z.as_slice().to_vec();
    let (n, s, w) = check(
        input.as_slice(),
        &mut values,
        |v| {
            z.as_mut_slice().copy_from_slice(v);
            loss_with(&c.gen, &z)
        },
        |v| {
            let m = Matrix::new(c.noise.rows(), c.noise.cols(), v.to_vec()).unwrap();
            kinks(&c.gen, &m)
        },
    );
    tally.add(n, s);
    worst.max(w)
}

#[derive(Debug, Default)]
pub struct Tally {
    pub checked: usize,
    pub skipped: usize,
}

impl Tally {
    fn add(&mut self, checked: usize, skipped: usize) {
        self.checked += checked;
        self.skipped += skipped;
    }
}

#[derive(Debug)]
pub struct Sweep {
    pub worst_d: f64,
    pub worst_g: f64,
    pub tally: Tally,
}

/// Worst relative error over `cases` random pairs, for both losses.
pub fn sweep(cases: u64, dropout: f64, mode: Mode) -> Sweep {
    let mut tally = Tally::default();
    let (mut worst_d, mut worst_g) = (0.0f64, 0.0f64);
    for seed in 0..cases {
        let c = random_case(seed, dropout);
        let masks = Rng::stream(seed, "masks");
        worst_d = worst_d.max(d_case(&c, mode, &masks, &mut tally));
        worst_g = worst_g.max(g_case(&c, mode, &masks, &mut tally));
    }
    Sweep {
        worst_d,
        worst_g,
        tally,
    }
}
