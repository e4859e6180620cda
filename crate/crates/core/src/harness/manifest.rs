//! World files and the manifest that lists them.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::sim_env::{generate_world, GenParams, ScenarioClass, WorldSpec};
use crate::state_space::canonical_json;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub seed: u64,
    pub class: ScenarioClass,
    pub params: GenParams,
    pub digest: String,
    /// Path relative to the manifest's directory.
    pub file: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub worlds: Vec<ManifestEntry>,
}

/// A world loaded for a suite run.
#[derive(Debug, Clone)]
pub struct SuiteWorld {
    pub class: ScenarioClass,
    pub digest: String,
    pub spec: Arc<WorldSpec>,
}

impl SuiteWorld {
    pub fn new(spec: WorldSpec) -> Self {
        SuiteWorld {
            class: spec.category,
            digest: spec.digest(),
            spec: Arc::new(spec),
        }
    }
}

/// Ten worlds each of classes A, B and C with parameters whose outcomes under
/// the scripted policies are fixed by construction.
pub fn forced_outcome_suite(seed: u64) -> Vec<(ScenarioClass, GenParams)> {
    let mut out = Vec::new();
    for class in [ScenarioClass::A, ScenarioClass::B, ScenarioClass::C] {
        for i in 0..10 {
            let params = match class {
                ScenarioClass::A => GenParams {
                    depth: 3,
                    branching: 2,
                    n_traps: 0,
                    irreversible_fraction: 0.3,
                    detection_depth: 2,
                    seed: seed + i,
                },
                _ => GenParams {
                    depth: 5,
                    branching: 2,
                    n_traps: 1,
                    irreversible_fraction: 0.3,
                    detection_depth: 2,
                    seed: seed + i,
                },
            };
            out.push((class, params));
        }
    }
    out
}

pub fn generate_suite(specs: &[(ScenarioClass, GenParams)]) -> Result<Vec<SuiteWorld>, HarnessError> {
    specs
        .iter()
        .map(|(class, params)| Ok(SuiteWorld::new(generate_world(*class, params)?)))
        .collect()
}

/// Write `<digest>.json` world files and `manifest.json` into `dir`.
pub fn write_worlds(
    dir: &Path,
    specs: &[(ScenarioClass, GenParams)],
    worlds: &[SuiteWorld],
) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut manifest = Manifest::default();
    for ((class, params), world) in specs.iter().zip(worlds) {
        let file = format!("{}.json", world.digest);
        let path = dir.join(&file);
        fs::write(&path, world.spec.to_canonical_json()).map_err(|e| HarnessError::io(&path, e))?;
        manifest.worlds.push(ManifestEntry {
            seed: params.seed,
            class: *class,
            params: params.clone(),
            digest: world.digest.clone(),
            file,
        });
    }
    let path = dir.join("manifest.json");
    fs::write(&path, canonical_json(&manifest)).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

/// Load every world a manifest lists, checking content digests.
pub fn load_manifest(path: &Path) -> Result<Vec<SuiteWorld>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    manifest
        .worlds
        .iter()
        .map(|entry| {
            let spec = load_world(&base.join(&entry.file))?;
            let world = SuiteWorld::new(spec);
            if world.digest != entry.digest {
                return Err(HarnessError::WorldDigestMismatch {
                    expected: entry.digest.clone(),
                    found: world.digest,
                });
            }
            Ok(world)
        })
        .collect()
}

pub fn load_world(path: &Path) -> Result<WorldSpec, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    WorldSpec::from_json(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}
