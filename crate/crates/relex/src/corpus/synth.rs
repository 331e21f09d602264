use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Bag, SentenceInstance};
use crate::error::{RelexError, Result};
use crate::sideinfo::split_relation_name;

/// Parameters for the seeded synthetic dataset generator.
///
/// Each relation gets two unique surface triggers (a two-token primary and a
/// one-token secondary) inserted between the entity mentions, a fixed
/// (subj_type, obj_type) signature, and an alias list containing both
/// triggers. A `noise_rate` fraction of sentences carry a trigger of a
/// different relation, standing in for distant-supervision label noise.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SynthSpec {
    pub n_relations: usize,
    pub n_type_classes: usize,
    pub n_bags: usize,
    pub sentences_per_bag: (usize, usize),
    pub vocab_size: usize,
    pub noise_rate: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_relations == 0
            || self.n_type_classes == 0
            || self.n_bags == 0
            || self.vocab_size == 0
        {
            return Err(RelexError::Config(
                "synthetic spec counts must be positive".into(),
            ));
        }
        if self.sentences_per_bag.0 == 0 || self.sentences_per_bag.0 > self.sentences_per_bag.1 {
            return Err(RelexError::Config(format!(
                "invalid sentences_per_bag range {:?}",
                self.sentences_per_bag
            )));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(RelexError::Config(format!(
                "noise_rate must lie in [0, 1), got {}",
                self.noise_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub bags: Vec<Bag>,
    /// relation name -> alias strings (both triggers).
    pub aliases: BTreeMap<String, Vec<String>>,
    /// split relation name -> paraphrases (the primary trigger only).
    pub paraphrases: BTreeMap<String, Vec<String>>,
    /// relation name -> (subj type, obj type) signature.
    pub relation_types: BTreeMap<String, (String, String)>,
}

fn relation_name(r: usize) -> String {
    format!("rel{r}")
}

fn primary_trigger(r: usize) -> Vec<String> {
    vec![format!("verb{r}"), format!("marker{r}")]
}

fn secondary_trigger(r: usize) -> Vec<String> {
    vec![format!("alt{r}")]
}

/// Trigger used when a sentence is flipped to noise. With a single relation
/// there is no other relation to borrow from, so a distractor trigger that
/// belongs to no relation is used instead.
fn noise_trigger(rng: &mut ChaCha8Rng, gold: usize, n_relations: usize) -> Vec<String> {
    if n_relations < 2 {
        return vec!["nverb".to_string(), "nmarker".to_string()];
    }
    let mut other = rng.gen_range(0..n_relations - 1);
    if other >= gold {
        other += 1;
    }
    if rng.gen_bool(0.5) {
        primary_trigger(other)
    } else {
        secondary_trigger(other)
    }
}

/// Generates a dataset as a pure function of the spec (including its seed).
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let r_count = spec.n_relations;
    let t_count = spec.n_type_classes;

    let mut aliases = BTreeMap::new();
    let mut paraphrases = BTreeMap::new();
    let mut relation_types = BTreeMap::new();
    for r in 0..r_count {
        let name = relation_name(r);
        aliases.insert(
            name.clone(),
            vec![primary_trigger(r).join(" "), secondary_trigger(r).join(" ")],
        );
        paraphrases.insert(
            split_relation_name(&name).join(" "),
            vec![primary_trigger(r).join(" ")],
        );
        relation_types.insert(
            name,
            (
                format!("type{}", r % t_count),
                format!("type{}", (r / t_count) % t_count),
            ),
        );
    }

    let mut bags = Vec::with_capacity(spec.n_bags);
    for b in 0..spec.n_bags {
        let gold = b % r_count;
        let gold_name = relation_name(gold);
        let (subj_type, obj_type) = relation_types[&gold_name].clone();
        let n_sentences = rng.gen_range(spec.sentences_per_bag.0..=spec.sentences_per_bag.1);
        let subj_mention: Vec<String> = if rng.gen_bool(0.5) {
            vec![format!("s{b}")]
        } else {
            vec![format!("s{b}"), "sx".to_string()]
        };
        let obj_mention: Vec<String> = if rng.gen_bool(0.5) {
            vec![format!("o{b}")]
        } else {
            vec![format!("o{b}"), "ox".to_string()]
        };

        let mut sentences = Vec::with_capacity(n_sentences);
        for _ in 0..n_sentences {
            let noisy = rng.gen_bool(spec.noise_rate);
            let trigger = if noisy {
                noise_trigger(&mut rng, gold, r_count)
            } else if rng.gen_bool(0.7) {
                primary_trigger(gold)
            } else {
                secondary_trigger(gold)
            };

            let mut filler = |rng: &mut ChaCha8Rng, n: usize| -> Vec<String> {
                (0..n)
                    .map(|_| format!("w{}", rng.gen_range(0..spec.vocab_size)))
                    .collect()
            };
            let prefix = {
                let n = rng.gen_range(0..=2usize);
                filler(&mut rng, n)
            };
            let suffix = {
                let n = rng.gen_range(0..=2usize);
                filler(&mut rng, n)
            };

            let mut tokens = Vec::new();
            tokens.extend(prefix.iter().cloned());
            let subj_start = tokens.len();
            tokens.extend(subj_mention.iter().cloned());
            let subj_end = tokens.len();
            tokens.extend(trigger.iter().cloned());
            let trig_head = tokens.len() - 1;
            let obj_start = tokens.len();
            tokens.extend(obj_mention.iter().cloned());
            let obj_end = tokens.len();
            tokens.extend(suffix.iter().cloned());
            let m = tokens.len();

            // Left-to-right chain plus an edge from the trigger head to the
            // head (last token) of each entity span.
            let mut dep_edges: Vec<(usize, usize)> = (0..m - 1).map(|i| (i, i + 1)).collect();
            dep_edges.push((trig_head, subj_end - 1));
            dep_edges.push((trig_head, obj_end - 1));
            dep_edges.retain(|&(u, v)| u != v);
            dep_edges.sort();
            dep_edges.dedup();

            let phrases = if rng.gen_bool(0.5) {
                Some(vec![trigger.clone()])
            } else {
                None
            };

            sentences.push(SentenceInstance {
                tokens,
                subj_span: (subj_start, subj_end),
                obj_span: (obj_start, obj_end),
                dep_edges,
                phrases,
            });
        }

        bags.push(Bag {
            subj: format!("ent_s{b}"),
            obj: format!("ent_o{b}"),
            relation: gold_name,
            subj_types: vec![subj_type],
            obj_types: vec![obj_type],
            sentences,
        });
    }

    Ok(SynthOutput {
        bags,
        aliases,
        paraphrases,
        relation_types,
    })
}

/// All trigger token sequences of a relation, in classification order.
/// Exposed so tests can verify sentences by string search alone.
pub fn triggers_of(r: usize) -> Vec<Vec<String>> {
    vec![primary_trigger(r), secondary_trigger(r)]
}
