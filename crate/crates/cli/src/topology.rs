//! `topology` (attachment trees, coarsening rules, average side counts) and
//! `validate-preset`.

use std::path::PathBuf;

use anyhow::Result;
use grain_pdmp::topology::{
    average_sides, check_matrices_against_rules, coarsening_rule, count_trees, enumerate_trees,
    MAX_ENUMERATED_LEAVES,
};
use grain_pdmp::{validate_preset, Trigger};
use serde::{Deserialize, Serialize};

use crate::common::{apply_config, usage, PresetArgs};

#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TopologyArgs {
    /// Print only the number of attachment trees with this many leaves.
    #[arg(long)]
    pub count: Option<usize>,
    /// Print the encodings of every attachment tree with this many leaves.
    #[arg(long)]
    pub enumerate: Option<usize>,
    /// Euler characteristic for the average side count (needs --edges).
    #[arg(long, requires = "edges", allow_hyphen_values = true)]
    pub euler: Option<i64>,
    /// Edge count for the average side count.
    #[arg(long, requires = "euler")]
    pub edges: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: PresetArgs,
    /// JSON file whose keys override the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn topo_err(e: impl std::fmt::Display) -> anyhow::Error {
    usage(e.to_string())
}

pub fn topology(args: TopologyArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.config.as_deref())?;
    if let Some(k) = args.count {
        emit!("{}", count_trees(k).map_err(topo_err)?);
        return Ok(());
    }
    if let Some(k) = args.enumerate {
        for tree in enumerate_trees(k).map_err(topo_err)? {
            emit!("{}", tree.encoding());
        }
        return Ok(());
    }
    if let (Some(chi), Some(edges)) = (args.euler, args.edges) {
        emit!("{}", average_sides(chi, edges).map_err(topo_err)?);
        return Ok(());
    }

    let preset = args.model.load()?;
    if !preset.is_grain() {
        return Err(usage(format!(
            "preset {} has no coarsening rules to check",
            preset.name
        )));
    }
    let trees: Vec<serde_json::Value> = (2..=5)
        .map(|k| {
            let list = enumerate_trees(k).expect("small k");
            serde_json::json!({
                "leaves": k,
                "count": count_trees(k).expect("small k"),
                "encodings": list.iter().map(|t| t.encoding()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let counts: Vec<serde_json::Value> = (2..=MAX_ENUMERATED_LEAVES)
        .map(|k| serde_json::json!({ "leaves": k, "count": count_trees(k).expect("small k") }))
        .collect();
    let rules: Vec<_> = [2, 3, 4, 5]
        .map(Trigger::Boundary)
        .into_iter()
        .chain([Trigger::Interior])
        .filter_map(coarsening_rule)
        .collect();
    let check = check_matrices_against_rules(&preset);
    let value = serde_json::json!({
        "preset": preset.name,
        "counts": counts,
        "trees": trees,
        "rules": rules,
        "rule_check": {
            "consistent": check.is_valid(),
            "violations": check.messages(),
        },
    });
    emit!("{}", serde_json::to_string_pretty(&value)?);
    if !check.is_valid() {
        anyhow::bail!("mutation matrices disagree with the coarsening rules");
    }
    Ok(())
}

#[derive(clap::Args, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ValidateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: PresetArgs,
    /// JSON file whose keys override the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn validate(args: ValidateArgs) -> Result<()> {
    let args = apply_config(args.clone(), args.config.as_deref())?;
    let preset = args.model.load()?;
    let mut messages = validate_preset(&preset).messages();
    if preset.is_grain() {
        messages.extend(check_matrices_against_rules(&preset).messages());
    }
    let value = serde_json::json!({
        "preset": preset.name,
        "species": preset.species.species().collect::<Vec<_>>(),
        "edge_deletion": preset.edge_deletion,
        "valid": messages.is_empty(),
        "violations": messages,
    });
    emit!("{}", serde_json::to_string_pretty(&value)?);
    if messages.is_empty() {
        Ok(())
    } else {
        anyhow::bail!("preset {} is invalid", preset.name)
    }
}
