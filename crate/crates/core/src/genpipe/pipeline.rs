use crate::client::ChatClient;
use crate::doc_model::DocumentModel;

use super::{discover, reconcile_mapping, reskin_document, seed_fill, GenError, Reconciled, Reskinned, SeedMap, ValueGenerator};

/// Everything produced for one template by stages one to three.
#[derive(Debug, Clone)]
pub struct Generated {
    pub seed_map: SeedMap,
    pub reconciled: Reconciled,
    pub reskinned: Reskinned,
}

/// Seed, discover through `client`, reconcile and reskin one template.
pub fn generate_document(
    doc: &DocumentModel,
    client: &dyn ChatClient,
    seed: u64,
    generator: &ValueGenerator<'_>,
) -> Result<Generated, GenError> {
    let seed_map = seed_fill(doc)?;
    let response = discover(client, doc, &seed_map, None)?;
    let reconciled = reconcile_mapping(&response, &seed_map, doc)?;
    let reskinned = reskin_document(doc, &reconciled.schema, &reconciled.mapping, seed, generator)?;
    Ok(Generated { seed_map, reconciled, reskinned })
}
