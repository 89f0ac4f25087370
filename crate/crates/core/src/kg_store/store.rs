use std::path::Path;

use chrono::{DateTime, Utc};

use super::graph::KnowledgeGraph;
use super::log::{AppendOutcome, FactLog, LogError};
use super::types::Fact;
use super::view::{materialize_latest, LatestView};

/// The fact log together with its incrementally maintained latest view.
#[derive(Debug)]
pub struct FactStore {
    log: FactLog,
    view: LatestView,
}

impl FactStore {
    pub fn open(path: &Path) -> Result<Self, LogError> {
        let log = FactLog::open(path)?;
        let view = materialize_latest(&log)?;
        Ok(FactStore { log, view })
    }

    pub fn log(&self) -> &FactLog {
        &self.log
    }

    pub fn view(&self) -> &LatestView {
        &self.view
    }

    pub fn append(
        &mut self,
        facts: &[Fact],
        run_id: &str,
        at: DateTime<Utc>,
        kg: &KnowledgeGraph,
    ) -> Result<AppendOutcome, LogError> {
        let outcome = self.log.append_facts(facts, run_id, at, kg)?;
        for row in &outcome.rows {
            self.view.apply(row);
        }
        Ok(outcome)
    }

    /// Replaces the cached view with a fresh full scan of the log.
    pub fn rematerialize(&mut self) -> Result<&LatestView, LogError> {
        self.view = materialize_latest(&self.log)?;
        Ok(&self.view)
    }
}
