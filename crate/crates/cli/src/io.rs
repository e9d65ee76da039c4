//! File ingestion and persistence: function specs, models, sample
//! sets and run records. JSON schemas are validated with field paths
//! in error messages; save/load round-trips are identities.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use juntalab::estim::{SampleSet, SampleSource};
use juntalab::learn::Model;
use juntalab::setfn::{make_family, FamilySpec, SetFunction};

pub type AnyError = Box<dyn std::error::Error>;

fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, AnyError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        format!("{}: field `{}`: {}", path.display(), e.path(), e.inner()).into()
    })
}

#[derive(Deserialize)]
struct WireSpec {
    family: String,
    n: usize,
    #[serde(default)]
    params: serde_json::Value,
}

fn params_into<T: DeserializeOwned>(path: &Path, params: serde_json::Value) -> Result<T, AnyError> {
    serde_path_to_error::deserialize(params).map_err(|e| {
        format!("{}: field `params.{}`: {}", path.display(), e.path(), e.inner()).into()
    })
}

/// Loads a function spec with field-path diagnostics: the wire shape
/// is parsed first, then the family-specific parameter record.
pub fn load_family_spec(path: &Path) -> Result<FamilySpec, AnyError> {
    use juntalab::setfn::Family;

    #[derive(Deserialize)]
    struct PLinear { weights: Vec<f64> }
    #[derive(Deserialize)]
    struct PCoverage { sets: Vec<Vec<usize>>, universe_weights: Vec<f64> }
    #[derive(Deserialize)]
    struct PGraphCut { edges: Vec<(usize, usize)>, #[serde(default)] weights: Option<Vec<f64>> }
    #[derive(Deserialize)]
    struct PMatroid { blocks: Vec<Vec<usize>>, caps: Vec<usize>, normalize: bool }
    #[derive(Deserialize)]
    struct PBudget { active: Vec<usize> }
    #[derive(Deserialize)]
    struct PTribes { a: usize, b: usize }
    #[derive(Deserialize)]
    struct PMaxLinear { clauses: Vec<Vec<f64>> }
    #[derive(Deserialize)]
    struct PPseudo { k: usize, active: Vec<usize> }
    #[derive(Deserialize)]
    struct PTable { values: Vec<f64> }

    let text = fs::read_to_string(path)?;
    let wire: WireSpec = parse_json(path, &text)?;
    let family = match wire.family.as_str() {
        "linear" => {
            let p: PLinear = params_into(path, wire.params)?;
            Family::Linear { weights: p.weights }
        }
        "coverage" => {
            let p: PCoverage = params_into(path, wire.params)?;
            Family::Coverage { sets: p.sets, universe_weights: p.universe_weights }
        }
        "graph_cut" => {
            let p: PGraphCut = params_into(path, wire.params)?;
            Family::GraphCut { edges: p.edges, weights: p.weights }
        }
        "matroid_rank" => {
            let p: PMatroid = params_into(path, wire.params)?;
            Family::MatroidRank { blocks: p.blocks, caps: p.caps, normalize: p.normalize }
        }
        "budget_additive" => {
            let p: PBudget = params_into(path, wire.params)?;
            Family::BudgetAdditive { active: p.active }
        }
        "tribes_xos" => {
            let p: PTribes = params_into(path, wire.params)?;
            Family::TribesXos { a: p.a, b: p.b }
        }
        "max_linear_xos" => {
            let p: PMaxLinear = params_into(path, wire.params)?;
            Family::MaxLinearXos { clauses: p.clauses }
        }
        "clipped_majority" => Family::ClippedMajority {},
        "pseudo_boolean" => {
            let p: PPseudo = params_into(path, wire.params)?;
            Family::PseudoBoolean { k: p.k, active: p.active }
        }
        "explicit_table" => {
            let p: PTable = params_into(path, wire.params)?;
            Family::ExplicitTable { values: p.values }
        }
        other => {
            return Err(format!(
                "{}: field `family`: unknown family `{other}` (expected one of linear, coverage, \
                 graph_cut, matroid_rank, budget_additive, tribes_xos, max_linear_xos, \
                 clipped_majority, pseudo_boolean, explicit_table)",
                path.display()
            )
            .into())
        }
    };
    Ok(FamilySpec::new(wire.n, family))
}

pub fn load_function(path: &Path) -> Result<(FamilySpec, SetFunction), AnyError> {
    let spec = load_family_spec(path)?;
    let f = make_family(&spec).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((spec, f))
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AnyError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model, AnyError> {
    let text = fs::read_to_string(path)?;
    parse_json(path, &text)
}

pub fn load_samples(path: &Path, n: usize, source: SampleSource) -> Result<SampleSet, AnyError> {
    let file = fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    SampleSet::from_csv(reader, n, source).map_err(|e| format!("{}: {e}", path.display()).into())
}

pub fn save_samples(path: &Path, samples: &SampleSet) -> Result<(), AnyError> {
    let mut buf = Vec::new();
    samples.to_csv(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Record of one CLI invocation: replaying the config reproduces the
/// metrics bit-for-bit (seeded determinism); only the timestamps
/// differ between replays.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub metrics: serde_json::Value,
    pub started_at_ms: u128,
    pub finished_at_ms: u128,
    pub code_version: String,
}

pub fn now_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

pub fn write_run_record(out: &Path, record: &RunRecord) -> Result<(), AnyError> {
    let mut path = out.as_os_str().to_owned();
    path.push(".run.json");
    save_json(Path::new(&path), record)
}
