//! Deterministic generator of desk-scale populations with spatially
//! correlated attributes.
//!
//! Records live at addresses drawn from per-neighbourhood pools (a finite
//! address grid, so geocodes repeat), and the categorical attributes are
//! tilted by neighbourhood profiles. That gives the synthesizers a real
//! geography-attribute relationship to preserve and the risk evaluation a
//! meaningful re-identification surface.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::data::{Column, Dataset, GeoPoint, Schema, Variable};
use crate::error::Result;

fn levels(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

/// Schema of the generated population: seven categorical attributes, a
/// ZIP-like region variable with one level per neighbourhood, and the
/// geocode.
pub fn toy_schema(neighborhoods: usize) -> Result<Schema> {
    Schema::new(
        vec![
            Variable::categorical("sex", vec!["male".into(), "female".into()]),
            Variable::categorical("foreign", vec!["no".into(), "yes".into()]),
            Variable::categorical("age", levels("a", 6)),
            Variable::categorical("education", levels("e", 4)),
            Variable::categorical("occupation", levels("o", 8)),
            Variable::categorical("wage", levels("w", 10)),
            Variable::categorical("zip", levels("z", neighborhoods)),
            Variable::geocode("geo"),
        ],
        vec!["geo".into()],
        vec!["sex".into(), "age".into(), "occupation".into(), "foreign".into()],
    )
}

struct Neighborhood {
    center: GeoPoint,
    addresses: Vec<GeoPoint>,
    wealth: f64,
    foreign_rate: f64,
    age_weights: Vec<f64>,
    occupation_weights: Vec<f64>,
    size_weight: f64,
}

fn weighted_pick(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Generates `n` records over `neighborhoods` spatial clusters, each with a
/// finite pool of `addresses_per_neighborhood` one-meter-snapped addresses.
pub fn toy_population(
    n: usize,
    neighborhoods: usize,
    addresses_per_neighborhood: usize,
    rng: &mut impl Rng,
) -> Result<Dataset> {
    let schema = Arc::new(toy_schema(neighborhoods)?);

    let side = (neighborhoods as f64).sqrt().ceil() as usize;
    let spacing = 4_000.0;
    let gamma = Gamma::new(2.0, 1.0).expect("valid gamma");
    let mut nbs = Vec::with_capacity(neighborhoods);
    for i in 0..neighborhoods {
        let gx = (i % side) as f64;
        let gy = (i / side) as f64;
        let center = GeoPoint::new(
            gx * spacing + rng.random::<f64>() * 900.0,
            gy * spacing + rng.random::<f64>() * 900.0,
        );
        let addresses = (0..addresses_per_neighborhood)
            .map(|_| {
                let angle = rng.random::<f64>() * std::f64::consts::TAU;
                let radius = rng.random::<f64>().sqrt() * 700.0;
                GeoPoint::new(
                    (center.x + radius * angle.cos()).floor(),
                    (center.y + radius * angle.sin()).floor(),
                )
            })
            .collect();
        let wealth = rng.random::<f64>();
        let foreign_rate = 0.02 + 0.3 * rng.random::<f64>().powi(2);
        let young = rng.random::<f64>();
        let age_weights = vec![
            0.4 + young,
            0.8 + young,
            1.0,
            1.0,
            0.8 + (1.0 - young),
            0.3 + (1.0 - young),
        ];
        let occupation_weights: Vec<f64> = (0..8).map(|_| gamma.sample(rng) * gamma.sample(rng)).collect();
        nbs.push(Neighborhood {
            center,
            addresses,
            wealth,
            foreign_rate,
            age_weights,
            occupation_weights,
            size_weight: 0.3 + gamma.sample(rng),
        });
    }
    let size_weights: Vec<f64> = nbs.iter().map(|nb| nb.size_weight).collect();

    let mut sex = Vec::with_capacity(n);
    let mut foreign = Vec::with_capacity(n);
    let mut age = Vec::with_capacity(n);
    let mut education = Vec::with_capacity(n);
    let mut occupation = Vec::with_capacity(n);
    let mut wage = Vec::with_capacity(n);
    let mut zip = Vec::with_capacity(n);
    let mut geo = Vec::with_capacity(n);

    for _ in 0..n {
        let nb_idx = weighted_pick(&size_weights, rng);
        let nb = &nbs[nb_idx];
        let _ = nb.center;
        sex.push(rng.random_range(1..=2u32));
        foreign.push(if rng.random::<f64>() < nb.foreign_rate { 2u32 } else { 1u32 });
        age.push(weighted_pick(&nb.age_weights, rng) as u32 + 1);
        let edu = {
            let e = (nb.wealth * 2.5 + rng.random::<f64>() * 2.0).floor() as u32;
            e.min(3) + 1
        };
        education.push(edu);
        occupation.push(weighted_pick(&nb.occupation_weights, rng) as u32 + 1);
        let w = nb.wealth * 5.0 + edu as f64 * 1.2 + rng.random::<f64>() * 3.0;
        wage.push((w.floor() as u32).clamp(0, 9) + 1);
        zip.push(nb_idx as u32 + 1);
        geo.push(nb.addresses[rng.random_range(0..nb.addresses.len())]);
    }

    Dataset::new(
        schema,
        vec![
            Column::Categorical(sex),
            Column::Categorical(foreign),
            Column::Categorical(age),
            Column::Categorical(education),
            Column::Categorical(occupation),
            Column::Categorical(wage),
            Column::Categorical(zip),
            Column::Geocode(geo),
        ],
    )
}
