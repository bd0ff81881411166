//! Seeded synthetic tables shaped like the two benchmark datasets.
//!
//! Labels follow a logistic rule over standardized continuous values,
//! categorical effects, and products of continuous values drawn from
//! different thirds of the attribute list. The product terms matter: they
//! are only learnable by layers that mix attributes across participants,
//! so architectures that mix later (or never) score measurably lower AUC.

use std::io::Write;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::data::ingest::{CellValue, RawTable};
use crate::data::schema::DatasetSchema;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

/// Which bundled table shape to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// 11 attributes (6 continuous, 5 categorical), census flavor.
    AdultLike,
    /// 21 attributes (14 continuous, 7 categorical), click-log flavor.
    AvazuLike,
}

impl SyntheticKind {
    pub fn schema(self) -> DatasetSchema {
        match self {
            SyntheticKind::AdultLike => DatasetSchema::adult_like(),
            SyntheticKind::AvazuLike => DatasetSchema::avazu_like(),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "adult_like" => Ok(SyntheticKind::AdultLike),
            "avazu_like" => Ok(SyntheticKind::AvazuLike),
            other => Err(Error::Config(format!(
                "unknown synthetic dataset {other:?}; expected adult_like or avazu_like"
            ))),
        }
    }
}

enum GenSpec {
    Continuous {
        mean: f64,
        sd: f64,
        weight: f64,
    },
    Categorical {
        vocab: &'static [&'static str],
        probs: &'static [f64],
        effects: &'static [f64],
    },
}

/// Product term between two continuous attributes (by attribute index).
struct Interaction {
    a: usize,
    b: usize,
    weight: f64,
}

struct LabelRule {
    intercept: f64,
    specs: Vec<GenSpec>,
    interactions: Vec<Interaction>,
}

fn adult_like_rule() -> LabelRule {
    LabelRule {
        intercept: -0.6,
        specs: vec![
            // first third of the attribute list
            GenSpec::Continuous {
                mean: 38.0,
                sd: 12.0,
                weight: 1.6,
            }, // age
            GenSpec::Categorical {
                vocab: &["gov", "other", "private", "self_emp"],
                probs: &[0.2, 0.05, 0.6, 0.15],
                effects: &[-0.2, -1.0, 0.4, 0.8],
            }, // workclass
            GenSpec::Continuous {
                mean: 40.0,
                sd: 10.0,
                weight: 1.0,
            }, // hours_per_week
            GenSpec::Categorical {
                vocab: &["bachelors", "college", "doctorate", "hs", "masters"],
                probs: &[0.25, 0.25, 0.05, 0.35, 0.1],
                effects: &[0.6, -0.2, 1.8, -0.8, 1.2],
            }, // education
            // second third
            GenSpec::Continuous {
                mean: 1200.0,
                sd: 900.0,
                weight: 1.4,
            }, // capital_gain
            GenSpec::Categorical {
                vocab: &["admin", "exec", "manual", "service", "tech"],
                probs: &[0.25, 0.15, 0.25, 0.2, 0.15],
                effects: &[0.0, 1.2, -0.8, -0.6, 1.0],
            }, // occupation
            GenSpec::Continuous {
                mean: 90.0,
                sd: 50.0,
                weight: -0.8,
            }, // capital_loss
            GenSpec::Categorical {
                vocab: &["divorced", "married", "single"],
                probs: &[0.15, 0.5, 0.35],
                effects: &[-0.2, 1.0, -0.8],
            }, // marital_status
            // last third
            GenSpec::Continuous {
                mean: 10.0,
                sd: 2.5,
                weight: 1.8,
            }, // education_num
            GenSpec::Categorical {
                vocab: &["husband", "own_child", "unmarried", "wife"],
                probs: &[0.4, 0.2, 0.25, 0.15],
                effects: &[0.8, -1.2, -0.4, 0.6],
            }, // relationship
            GenSpec::Continuous {
                mean: 190_000.0,
                sd: 10_500.0,
                weight: 0.6,
            }, // final_weight
        ],
        interactions: vec![
            Interaction {
                a: 0,
                b: 4,
                weight: 1.1,
            }, // age x capital_gain
            Interaction {
                a: 2,
                b: 8,
                weight: 0.9,
            }, // hours x education_num
            Interaction {
                a: 6,
                b: 10,
                weight: 0.8,
            }, // capital_loss x final_weight
        ],
    }
}

fn avazu_like_rule() -> LabelRule {
    const SITE: GenSpec = GenSpec::Categorical {
        vocab: &["leisure", "news", "shopping", "social"],
        probs: &[0.2, 0.3, 0.25, 0.25],
        effects: &[0.1, -0.3, 0.45, 0.2],
    };
    let cont = |i: usize, weight: f64| GenSpec::Continuous {
        mean: (i as f64) * 3.0,
        sd: 1.0 + (i as f64) * 0.25,
        weight,
    };
    LabelRule {
        intercept: -1.0,
        specs: vec![
            cont(1, 0.55),  // c01
            cont(2, -0.35), // c02
            GenSpec::Categorical {
                vocab: &["banner_bottom", "banner_side", "banner_top"],
                probs: &[0.3, 0.2, 0.5],
                effects: &[-0.25, 0.0, 0.35],
            },
            cont(3, 0.45), // c03
            cont(4, 0.5),  // c04
            SITE,
            cont(5, -0.3), // c05
            cont(6, 0.5),  // c06
            cont(7, 0.35), // c07
            GenSpec::Categorical {
                vocab: &["games", "productivity", "utilities"],
                probs: &[0.4, 0.3, 0.3],
                effects: &[0.3, -0.25, 0.05],
            },
            cont(8, -0.4), // c08
            cont(9, 0.55), // c09
            GenSpec::Categorical {
                vocab: &["desktop", "phone", "tablet"],
                probs: &[0.25, 0.6, 0.15],
                effects: &[-0.2, 0.3, 0.0],
            },
            cont(10, 0.3),  // c10
            cont(11, 0.45), // c11
            GenSpec::Categorical {
                vocab: &["cellular", "wifi"],
                probs: &[0.45, 0.55],
                effects: &[-0.15, 0.25],
            },
            cont(12, -0.35), // c12
            GenSpec::Categorical {
                vocab: &["evening", "morning", "night", "noon"],
                probs: &[0.3, 0.25, 0.15, 0.3],
                effects: &[0.3, -0.1, -0.35, 0.1],
            },
            cont(13, 0.4), // c13
            GenSpec::Categorical {
                vocab: &["weekday", "weekend"],
                probs: &[0.7, 0.3],
                effects: &[-0.1, 0.25],
            },
            cont(14, 0.5), // c14
        ],
        interactions: vec![
            Interaction {
                a: 0,
                b: 7,
                weight: 0.9,
            }, // c01 x c06
            Interaction {
                a: 4,
                b: 14,
                weight: 0.8,
            }, // c04 x c11
            Interaction {
                a: 11,
                b: 18,
                weight: 0.7,
            }, // c09 x c13
        ],
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Generates `n` rows with deterministic ids `row0000000...`. The same
/// `(kind, n, seed)` always yields the same table.
pub fn generate(kind: SyntheticKind, n: usize, seed: u64) -> (DatasetSchema, RawTable) {
    let schema = kind.schema();
    let rule = match kind {
        SyntheticKind::AdultLike => adult_like_rule(),
        SyntheticKind::AvazuLike => avazu_like_rule(),
    };
    debug_assert_eq!(rule.specs.len(), schema.attributes.len());
    let samplers: Vec<Option<WeightedIndex<f64>>> = rule
        .specs
        .iter()
        .map(|s| match s {
            GenSpec::Continuous { .. } => None,
            GenSpec::Categorical { probs, .. } => {
                Some(WeightedIndex::new(probs.iter().copied()).expect("static weights"))
            }
        })
        .collect();

    let mut rng = rng::stream(seed, "synthetic", kind as u64);
    let mut table = RawTable {
        ids: Vec::with_capacity(n),
        labels: Vec::with_capacity(n),
        rows: Vec::with_capacity(n),
        rejected: Vec::new(),
    };
    let mut z = vec![0.0; rule.specs.len()];
    for i in 0..n {
        let mut logit = rule.intercept;
        let mut cells = Vec::with_capacity(rule.specs.len());
        for (a, spec) in rule.specs.iter().enumerate() {
            match spec {
                GenSpec::Continuous { mean, sd, weight } => {
                    let standard = f64::sample_standard_normal(&mut rng);
                    z[a] = standard;
                    logit += weight * standard;
                    cells.push(CellValue::Continuous(mean + sd * standard));
                }
                GenSpec::Categorical { vocab, effects, .. } => {
                    let pick = samplers[a].as_ref().unwrap().sample(&mut rng);
                    logit += effects[pick];
                    cells.push(CellValue::Categorical(vocab[pick].to_owned()));
                }
            }
        }
        for inter in &rule.interactions {
            logit += inter.weight * z[inter.a] * z[inter.b];
        }
        let label = u8::from(rng.gen::<f64>() < sigmoid(logit));
        table.ids.push(format!("row{i:07}"));
        table.labels.push(label);
        table.rows.push(cells);
    }
    (schema, table)
}

/// Writes the table as a headered CSV. Continuous cells use the shortest
/// representation that parses back to the identical float, so a write/load
/// round trip reproduces the table exactly.
pub fn write_csv(path: &Path, schema: &DatasetSchema, table: &RawTable) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "{},{}", schema.id_column, schema.label_column)?;
    for attr in &schema.attributes {
        write!(out, ",{}", attr.name)?;
    }
    writeln!(out)?;
    for i in 0..table.n_rows() {
        write!(out, "{},{}", table.ids[i], table.labels[i])?;
        for cell in &table.rows[i] {
            match cell {
                CellValue::Continuous(v) => write!(out, ",{v}")?,
                CellValue::Categorical(v) => write!(out, ",{v}")?,
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
