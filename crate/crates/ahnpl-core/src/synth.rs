//! Synthetic compositional scenes: captions, image features, a train
//! corpus, and a perturbed-caption benchmark whose items each pair one
//! image with a correct and an edited incorrect description.
//!
//! A scene is `subject (object, attribute) — relation — object (object,
//! attribute)`. Captions follow the template `a {att1} {obj1} {rel} a
//! {att2} {obj2}`. Image features are role-specific one-hot blocks plus
//! Gaussian noise, so that swapped compositions produce distinct features
//! and the benchmark is solvable in principle.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::fnv1a;
use crate::textgen::{Caption, PosLexicon, PosTag};

pub const OBJECT_WORDS: [&str; 8] = [
    "cube", "ball", "cone", "torus", "prism", "wedge", "ring", "disk",
];
pub const ATTRIBUTE_WORDS: [&str; 6] = ["red", "blue", "green", "yellow", "shiny", "matte"];
pub const RELATION_WORDS: [(&str, PosTag); 4] = [
    ("holds", PosTag::Verb),
    ("touches", PosTag::Verb),
    ("beside", PosTag::Adp),
    ("above", PosTag::Adp),
];
pub const DETERMINER: &str = "a";

/// Vocabulary sizes actually in play (prefixes of the word lists).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSizes {
    pub objects: usize,
    pub attributes: usize,
    pub relations: usize,
}

impl Default for SynthSizes {
    fn default() -> Self {
        Self {
            objects: OBJECT_WORDS.len(),
            attributes: ATTRIBUTE_WORDS.len(),
            relations: RELATION_WORDS.len(),
        }
    }
}

impl SynthSizes {
    pub fn validate(&self) -> Result<()> {
        if self.objects < 2 || self.objects > OBJECT_WORDS.len() {
            return Err(Error::Config(format!(
                "objects must be in 2..={}, got {}",
                OBJECT_WORDS.len(),
                self.objects
            )));
        }
        if self.attributes < 2 || self.attributes > ATTRIBUTE_WORDS.len() {
            return Err(Error::Config(format!(
                "attributes must be in 2..={}, got {}",
                ATTRIBUTE_WORDS.len(),
                self.attributes
            )));
        }
        if self.relations < 2 || self.relations > RELATION_WORDS.len() {
            return Err(Error::Config(format!(
                "relations must be in 2..={}, got {}",
                RELATION_WORDS.len(),
                self.relations
            )));
        }
        Ok(())
    }

    /// Dimension of the one-hot feature layout
    /// `[obj1 | att1 | rel | obj2 | att2]`.
    pub fn feature_dim(&self) -> usize {
        2 * self.objects + 2 * self.attributes + self.relations
    }
}

/// One compositional scene; ids index the word lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scene {
    pub subject: (usize, usize),
    pub relation: usize,
    pub object: (usize, usize),
}

impl Scene {
    pub fn id(&self) -> String {
        format!(
            "s{}-{}-{}-{}-{}",
            self.subject.0, self.subject.1, self.relation, self.object.0, self.object.1
        )
    }

    fn hash(&self) -> u64 {
        fnv1a(self.id().as_bytes())
    }
}

/// Scenes are split into disjoint train and benchmark pools by id hash.
pub fn is_benchmark_scene(scene: &Scene) -> bool {
    scene.hash().is_multiple_of(4)
}

/// Uniform scene draw with distinct subject and object nouns; the object id
/// is drawn as a shifted offset so the draw count is input-independent.
pub fn generate_scene(rng: &mut impl Rng, sizes: SynthSizes) -> Scene {
    let obj1 = rng.random_range(0..sizes.objects);
    let att1 = rng.random_range(0..sizes.attributes);
    let relation = rng.random_range(0..sizes.relations);
    let obj2 = (obj1 + 1 + rng.random_range(0..sizes.objects - 1)) % sizes.objects;
    let att2 = rng.random_range(0..sizes.attributes);
    Scene {
        subject: (obj1, att1),
        relation,
        object: (obj2, att2),
    }
}

/// Template caption `a {att1} {obj1} {rel} a {att2} {obj2}` with tags.
pub fn render_caption(id: &str, scene: &Scene) -> Caption {
    let (rel_word, rel_tag) = RELATION_WORDS[scene.relation];
    let tokens = vec![
        DETERMINER.to_string(),
        ATTRIBUTE_WORDS[scene.subject.1].to_string(),
        OBJECT_WORDS[scene.subject.0].to_string(),
        rel_word.to_string(),
        DETERMINER.to_string(),
        ATTRIBUTE_WORDS[scene.object.1].to_string(),
        OBJECT_WORDS[scene.object.0].to_string(),
    ];
    let tags = vec![
        PosTag::Det,
        PosTag::Adj,
        PosTag::Noun,
        rel_tag,
        PosTag::Det,
        PosTag::Adj,
        PosTag::Noun,
    ];
    Caption::new(id, tokens, tags).expect("template caption is well-formed")
}

/// Inverse of [`render_caption`]; used by round-trip tests and loaders that
/// need scene ids back from caption tokens.
pub fn parse_caption(tokens: &[String]) -> Result<Scene> {
    if tokens.len() != 7 {
        return Err(Error::Config(format!(
            "template caption has 7 tokens, got {}",
            tokens.len()
        )));
    }
    let find = |list: &[&str], word: &str| -> Result<usize> {
        list.iter()
            .position(|w| *w == word)
            .ok_or_else(|| Error::UnknownWord(word.to_string()))
    };
    let rel = RELATION_WORDS
        .iter()
        .position(|(w, _)| *w == tokens[3])
        .ok_or_else(|| Error::UnknownWord(tokens[3].clone()))?;
    Ok(Scene {
        subject: (
            find(&OBJECT_WORDS, &tokens[2])?,
            find(&ATTRIBUTE_WORDS, &tokens[1])?,
        ),
        relation: rel,
        object: (
            find(&OBJECT_WORDS, &tokens[6])?,
            find(&ATTRIBUTE_WORDS, &tokens[5])?,
        ),
    })
}

/// Role-specific one-hot blocks plus Gaussian noise.
pub fn render_image_features(
    scene: &Scene,
    sizes: SynthSizes,
    noise_sigma: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut features = vec![0.0; sizes.feature_dim()];
    let mut offset = 0;
    features[offset + scene.subject.0] = 1.0;
    offset += sizes.objects;
    features[offset + scene.subject.1] = 1.0;
    offset += sizes.attributes;
    features[offset + scene.relation] = 1.0;
    offset += sizes.relations;
    features[offset + scene.object.0] = 1.0;
    offset += sizes.objects;
    features[offset + scene.object.1] = 1.0;
    if noise_sigma > 0.0 {
        for f in &mut features {
            *f += noise_sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    features
}

/// The six perturbation families of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Category {
    SwapObj,
    SwapAtt,
    ReplaceRel,
    ReplaceAtt,
    ReplaceObj,
    AddAtt,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::SwapObj,
        Category::SwapAtt,
        Category::ReplaceRel,
        Category::ReplaceAtt,
        Category::ReplaceObj,
        Category::AddAtt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::SwapObj => "SWAP_OBJ",
            Category::SwapAtt => "SWAP_ATT",
            Category::ReplaceRel => "REPLACE_REL",
            Category::ReplaceAtt => "REPLACE_ATT",
            Category::ReplaceObj => "REPLACE_OBJ",
            Category::AddAtt => "ADD_ATT",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown category {s:?}")))
    }
}

/// One benchmark item: image features, the correct caption, and the edited
/// incorrect caption.
#[derive(Debug, Clone)]
pub struct ChoiceItem {
    pub id: String,
    pub category: Category,
    pub features: Vec<f64>,
    pub positive: Caption,
    pub negative: Caption,
}

// Template slot positions.
const ATT1: usize = 1;
const OBJ1: usize = 2;
const REL: usize = 3;
const ATT2: usize = 5;
const OBJ2: usize = 6;

fn different_index(current: usize, count: usize, rng: &mut impl Rng) -> usize {
    (current + 1 + rng.random_range(0..count - 1)) % count
}

/// Applies a category's edit to the positive caption. The edit changes what
/// the caption asserts about the scene, so the result is incorrect by
/// construction.
fn apply_edit(
    positive: &Caption,
    scene: &Scene,
    category: Category,
    sizes: SynthSizes,
    rng: &mut impl Rng,
) -> Caption {
    let mut tokens = positive.tokens.clone();
    let mut tags = positive.tags.clone();
    match category {
        Category::SwapObj => tokens.swap(OBJ1, OBJ2),
        Category::SwapAtt => tokens.swap(ATT1, ATT2),
        Category::ReplaceRel => {
            let new_rel = different_index(scene.relation, sizes.relations, rng);
            tokens[REL] = RELATION_WORDS[new_rel].0.to_string();
            tags[REL] = RELATION_WORDS[new_rel].1;
        }
        Category::ReplaceAtt => {
            let (slot, current) = if rng.random_bool(0.5) {
                (ATT1, scene.subject.1)
            } else {
                (ATT2, scene.object.1)
            };
            let new_att = different_index(current, sizes.attributes, rng);
            tokens[slot] = ATTRIBUTE_WORDS[new_att].to_string();
        }
        Category::ReplaceObj => {
            let (slot, current, other) = if rng.random_bool(0.5) {
                (OBJ1, scene.subject.0, scene.object.0)
            } else {
                (OBJ2, scene.object.0, scene.subject.0)
            };
            // Stay distinct from both nouns of the scene.
            let candidates: Vec<usize> = (0..sizes.objects)
                .filter(|&o| o != current && o != other)
                .collect();
            let new_obj = candidates[rng.random_range(0..candidates.len())];
            tokens[slot] = OBJECT_WORDS[new_obj].to_string();
        }
        Category::AddAtt => {
            let (insert_at, current) = if rng.random_bool(0.5) {
                (OBJ1, scene.subject.1)
            } else {
                (OBJ2, scene.object.1)
            };
            let extra = different_index(current, sizes.attributes, rng);
            tokens.insert(insert_at, ATTRIBUTE_WORDS[extra].to_string());
            tags.insert(insert_at, PosTag::Adj);
        }
    }
    Caption::new(format!("{}-neg", positive.id), tokens, tags)
        .expect("edited caption is well-formed")
}

/// Everything the generator needs for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub sizes: SynthSizes,
    pub train_pairs: usize,
    pub bench_items: usize,
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sizes: SynthSizes::default(),
            train_pairs: 2000,
            bench_items: 600,
            // High enough that single-image hard-negative comparisons carry
            // information that noisy cross-image batch contrasts do not.
            noise_sigma: 0.4,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.sizes.validate()?;
        if self.train_pairs == 0 || self.bench_items == 0 {
            return Err(Error::Config("train_pairs and bench_items must be positive".into()));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be finite and ≥ 0".into()));
        }
        Ok(())
    }
}

/// One training pair.
#[derive(Debug, Clone)]
pub struct TrainPair {
    pub id: String,
    pub caption: Caption,
    pub features: Vec<f64>,
}

fn scene_from_pool(
    rng: &mut impl Rng,
    sizes: SynthSizes,
    want_benchmark: bool,
    constraint: impl Fn(&Scene) -> bool,
) -> Scene {
    loop {
        let scene = generate_scene(rng, sizes);
        if is_benchmark_scene(&scene) == want_benchmark && constraint(&scene) {
            return scene;
        }
    }
}

/// Training pairs drawn from the train pool.
pub fn build_train_corpus(config: &SynthConfig, rng: &mut impl Rng) -> Result<Vec<TrainPair>> {
    config.validate()?;
    let mut pairs = Vec::with_capacity(config.train_pairs);
    for i in 0..config.train_pairs {
        let scene = scene_from_pool(rng, config.sizes, false, |_| true);
        let id = format!("c{i:05}");
        let caption = render_caption(&id, &scene);
        let features = render_image_features(&scene, config.sizes, config.noise_sigma, rng);
        pairs.push(TrainPair {
            id,
            caption,
            features,
        });
    }
    Ok(pairs)
}

/// Benchmark items drawn from the benchmark pool with category counts
/// balanced to ±1 (round-robin over `categories`).
pub fn build_benchmark(
    config: &SynthConfig,
    categories: &[Category],
    rng: &mut impl Rng,
) -> Result<Vec<ChoiceItem>> {
    config.validate()?;
    if categories.is_empty() {
        return Err(Error::EmptyInput("benchmark categories"));
    }
    if categories.contains(&Category::ReplaceObj) && config.sizes.objects < 3 {
        return Err(Error::Config(
            "REPLACE_OBJ needs at least 3 objects (replacement must differ from both scene nouns)"
                .into(),
        ));
    }
    let mut items = Vec::with_capacity(config.bench_items);
    for i in 0..config.bench_items {
        let category = categories[i % categories.len()];
        // SWAP_ATT needs distinct attributes or the edit would be a no-op.
        let scene = scene_from_pool(rng, config.sizes, true, |s| {
            category != Category::SwapAtt || s.subject.1 != s.object.1
        });
        let id = format!("b{i:05}");
        let positive = render_caption(&id, &scene);
        let negative = apply_edit(&positive, &scene, category, config.sizes, rng);
        debug_assert_ne!(positive.tokens, negative.tokens);
        let features = render_image_features(&scene, config.sizes, config.noise_sigma, rng);
        items.push(ChoiceItem {
            id,
            category,
            features,
            positive,
            negative,
        });
    }
    Ok(items)
}

/// Lexicon covering every word the generator can emit.
pub fn build_lexicon(sizes: SynthSizes) -> Result<PosLexicon> {
    sizes.validate()?;
    let mut entries = vec![(DETERMINER.to_string(), PosTag::Det)];
    for word in &OBJECT_WORDS[..sizes.objects] {
        entries.push((word.to_string(), PosTag::Noun));
    }
    for word in &ATTRIBUTE_WORDS[..sizes.attributes] {
        entries.push((word.to_string(), PosTag::Adj));
    }
    for (word, tag) in &RELATION_WORDS[..sizes.relations] {
        entries.push((word.to_string(), *tag));
    }
    PosLexicon::from_entries(entries)
}
