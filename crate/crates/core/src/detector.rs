//! Toy image pipeline: a normalizer feeding cat and dog detectors, optionally
//! behind a park/street pre-detector that decides whether dogs are looked
//! for at all.
//!
//! An "image" is a text file: a `scene <name>` line followed by one
//! `<kind> <x> <y>` line per object. Case and line order are not
//! significant until the normalizer has run.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::PortRef;
use crate::harness::{ExecContext, Generator, GeneratorRequest, Registry, TestGroup};

/// Three-component system: normalizer, cat detector, dog detector.
pub const THREE_COMPONENT_SPEC: &str = include_str!("../specs/detector.toml");
/// The same with starred relations that are defined on both classes.
pub const STARRED_SPEC: &str = include_str!("../specs/detector-starred.toml");
/// Four-component system with the pre-detector and its two branches.
pub const FOUR_COMPONENT_SPEC: &str = include_str!("../specs/detector-four.toml");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub scene: String,
    pub objects: BTreeSet<(String, u32, u32)>,
}

impl Image {
    pub fn parse(text: &str) -> std::result::Result<Image, String> {
        let mut scene = None;
        let mut objects = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim().to_lowercase();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["scene", s] => scene = Some(s.to_string()),
                [kind, x, y] => {
                    let x = x.parse().map_err(|_| format!("line {}: bad x", n + 1))?;
                    let y = y.parse().map_err(|_| format!("line {}: bad y", n + 1))?;
                    objects.insert((kind.to_string(), x, y));
                }
                _ => return Err(format!("line {}: cannot parse `{line}`", n + 1)),
            }
        }
        Ok(Image {
            scene: scene.ok_or("image has no scene line")?,
            objects,
        })
    }

    pub fn render(&self) -> String {
        let mut out = format!("scene {}\n", self.scene);
        for (k, x, y) in &self.objects {
            out.push_str(&format!("{k} {x} {y}\n"));
        }
        out
    }
}

fn read_image(p: &PathBuf) -> std::result::Result<Image, String> {
    let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
    Image::parse(&text)
}

fn port<'a>(map: &'a BTreeMap<String, PathBuf>, name: &str) -> std::result::Result<&'a PathBuf, String> {
    map.get(name).ok_or_else(|| format!("missing port `{name}`"))
}

fn write(p: &PathBuf, body: &str) -> std::result::Result<(), String> {
    fs::write(p, body).map_err(|e| format!("{}: {e}", p.display()))
}

fn normalize(
    _: &ExecContext<'_>,
    inputs: &BTreeMap<String, PathBuf>,
    outputs: &BTreeMap<String, PathBuf>,
) -> std::result::Result<(), String> {
    let img = read_image(port(inputs, "img")?)?;
    write(port(outputs, "img")?, &img.render())
}

fn pre_detect(
    _: &ExecContext<'_>,
    inputs: &BTreeMap<String, PathBuf>,
    outputs: &BTreeMap<String, PathBuf>,
) -> std::result::Result<(), String> {
    let img = read_image(port(inputs, "img")?)?;
    write(port(outputs, "img")?, &img.render())?;
    write(port(outputs, "flag")?, if img.scene == "park" { "true\n" } else { "false\n" })
}

/// Lists `x y` of every object of the kind named by the `kind` parameter.
fn detect(
    ctx: &ExecContext<'_>,
    inputs: &BTreeMap<String, PathBuf>,
    outputs: &BTreeMap<String, PathBuf>,
) -> std::result::Result<(), String> {
    let kind = ctx.param("kind").ok_or("detector needs a `kind` parameter")?;
    let img = read_image(port(inputs, "img")?)?;
    let mut out = String::new();
    for (k, x, y) in &img.objects {
        if k == kind {
            out.push_str(&format!("{x} {y}\n"));
        }
    }
    write(port(outputs, "found")?, &out)
}

/// Writes a series of images of one scene, each adding one animal.
///
/// Parameters: `scene` (default `park`), `animal` (`cat` or `dog`, default
/// taken from the class `add-<animal>`), `n` (default 3), `seed`, and
/// `port` (the system input, default `normalizer.img`).
pub struct AnimalSeries;

impl Generator for AnimalSeries {
    fn generate(&self, req: &GeneratorRequest<'_>) -> Result<TestGroup> {
        let scene: String = req.param("scene", "park".to_string())?;
        let default_animal = req.class.strip_prefix("add-").unwrap_or("cat").to_string();
        let animal: String = req.param("animal", default_animal)?;
        let n: usize = req.param("n", 3)?;
        let seed: u64 = req.param("seed", 0)?;
        let port: PortRef = req.param("port", "normalizer.img".to_string())?.parse()?;
        if n < 2 {
            return Err(Error::config(format!("group `{}` needs n >= 2", req.group_id)));
        }
        fs::create_dir_all(req.dir).map_err(|e| Error::io(req.dir, e))?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut taken = BTreeSet::new();
        let mut fresh = |rng: &mut ChaCha8Rng| loop {
            let p = (rng.random_range(0..100u32), rng.random_range(0..100u32));
            if taken.insert(p) {
                return p;
            }
        };
        let mut objects: Vec<(String, u32, u32)> = Vec::new();
        for kind in ["cat", "cat", "dog", "dog"] {
            let (x, y) = fresh(&mut rng);
            objects.push((kind.to_string(), x, y));
        }

        let mut tests = Vec::new();
        for k in 0..n {
            if k > 0 {
                let (x, y) = fresh(&mut rng);
                objects.push((animal.clone(), x, y));
            }
            // raw images use mixed case and unsorted lines
            let mut lines: Vec<String> = objects
                .iter()
                .map(|(kind, x, y)| format!("{} {x} {y}", kind.to_uppercase()))
                .collect();
            lines.reverse();
            let body = format!("Scene {scene}\n{}\n", lines.join("\n"));
            let path = req.dir.join(format!("image-{k:02}.txt"));
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            tests.push(BTreeMap::from([(port.clone(), path)]));
        }
        Ok(TestGroup {
            id: req.group_id.to_string(),
            class: req.class.to_string(),
            tests,
            metadata: BTreeMap::from([
                ("scene".to_string(), scene),
                ("animal".to_string(), animal),
                ("seed".to_string(), seed.to_string()),
            ]),
        })
    }
}

pub fn register(reg: &mut Registry) {
    reg.add_executor("image-normalize", normalize);
    reg.add_executor("pre-detect", pre_detect);
    reg.add_executor("detect", detect);
    reg.add_generator("detector-animals", AnimalSeries);
}
