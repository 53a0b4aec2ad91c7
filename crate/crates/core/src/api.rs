//! Operations shared by the CLI and the HTTP service. Every response is a
//! serializable value rendered with [`render`], so both front ends emit the
//! same bytes for the same store, config and request.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chronicle::{event_from_value, Chronicle, ChronicleError, Event, Stream};
use crate::config::Config;
use crate::enrichment::{enrich, ClientRegistry, EnrichError, EnrichmentCache};
use crate::mining::{cooccurrence_matrix, verify, CategorySpec, Direction, Heatmap, Hypothesis, MiningError, VerifiedRule, VerifyParams};
use crate::model::{build_model, seed_rulebase, ModelError, PersonalFoodModel};
use crate::recommend::{candidate_event, recommend, Recommendation, RecommendError, RecommendationRequest, Weights};
use crate::store::{AppendOutcome, StoreError, UserStore};
use crate::taste::{TasteCalibration, TasteCatalog};
use crate::time::{parse_duration_ms, Timestamp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    BadRequest,
    NotFound,
    Conflict,
    Unprocessable,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Serialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    #[serde(skip)]
    pub kind: ErrorKind,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(kind: ErrorKind, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            kind,
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::BadRequest, code, message)
    }

    /// `{"error": {"code": ..., "message": ...}}`
    pub fn body(&self) -> Value {
        serde_json::json!({ "error": self })
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let msg = e.to_string();
        match e {
            StoreError::InvalidUserId(_) => ApiError::new(ErrorKind::BadRequest, "invalid_user_id", msg),
            StoreError::UnknownUser(_) => ApiError::new(ErrorKind::NotFound, "unknown_user", msg),
            StoreError::Conflict(_) => ApiError::new(ErrorKind::Conflict, "conflicting_duplicate", msg),
            StoreError::Chronicle(c) => c.into(),
            StoreError::Model(m) => m.into(),
            StoreError::Io(_) => ApiError::new(ErrorKind::Internal, "io_error", msg),
        }
    }
}

impl From<ChronicleError> for ApiError {
    fn from(e: ChronicleError) -> Self {
        let msg = e.to_string();
        match e {
            ChronicleError::DuplicateId(_) => ApiError::new(ErrorKind::Conflict, "duplicate_id", msg),
            ChronicleError::InvalidEvent(_) => ApiError::new(ErrorKind::BadRequest, "invalid_event", msg),
            ChronicleError::InvalidRange { .. } => ApiError::new(ErrorKind::BadRequest, "invalid_range", msg),
            ChronicleError::ParseError { .. } => ApiError::new(ErrorKind::BadRequest, "parse_error", msg),
            ChronicleError::SchemaVersionMismatch { .. } => {
                ApiError::new(ErrorKind::BadRequest, "schema_version_mismatch", msg)
            }
            ChronicleError::Io(_) => ApiError::new(ErrorKind::Internal, "io_error", msg),
        }
    }
}

impl From<MiningError> for ApiError {
    fn from(e: MiningError) -> Self {
        let kind = match e {
            MiningError::InvalidWindow
            | MiningError::BadCategorySpec(_)
            | MiningError::InvalidHypothesis(_)
            | MiningError::InvalidParameter(_) => ErrorKind::BadRequest,
            _ => ErrorKind::Unprocessable,
        };
        ApiError::new(kind, e.code(), e.to_string())
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        let kind = match e {
            ModelError::Io(_) => ErrorKind::Internal,
            _ => ErrorKind::Unprocessable,
        };
        ApiError::new(kind, e.code(), e.to_string())
    }
}

impl From<RecommendError> for ApiError {
    fn from(e: RecommendError) -> Self {
        let kind = match e {
            RecommendError::NoModel(_) => ErrorKind::NotFound,
            RecommendError::InvalidRequest(_) | RecommendError::NoCandidates => ErrorKind::BadRequest,
            RecommendError::IncompleteCandidate(_) => ErrorKind::Unprocessable,
        };
        ApiError::new(kind, e.code(), e.to_string())
    }
}

impl From<EnrichError> for ApiError {
    fn from(e: EnrichError) -> Self {
        let (kind, code) = match e {
            EnrichError::UnresolvedFood(_) => (ErrorKind::Unprocessable, "unresolved_food"),
            EnrichError::ClientUnavailable(_) => (ErrorKind::Unprocessable, "client_unavailable"),
            EnrichError::NotFound(_) => (ErrorKind::Unprocessable, "barcode_not_found"),
            EnrichError::MalformedBarcode(_) => (ErrorKind::BadRequest, "malformed_barcode"),
            EnrichError::Io(_) | EnrichError::Fixture(_) => (ErrorKind::Internal, "enrichment_setup"),
        };
        ApiError::new(kind, code, e.to_string())
    }
}

/// Canonical JSON (sorted keys) followed by a newline.
pub fn render<T: Serialize>(value: &T) -> String {
    crate::canonical::to_canonical_string(value).expect("responses serialize") + "\n"
}

/// Relative data paths resolve against the working directory, falling back
/// to `PFM_HOME` when set.
fn resolve(path: &str) -> PathBuf {
    let p = PathBuf::from(path);
    if p.is_absolute() || p.exists() {
        return p;
    }
    match std::env::var_os("PFM_HOME") {
        Some(home) => PathBuf::from(home).join(p),
        None => p,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleSummary {
    pub rule_id: String,
    pub overall_effect: Option<f64>,
    pub overall_p: f64,
    pub direction: Direction,
    pub metric: String,
    pub n_contexts: usize,
    pub n_treated: usize,
    pub n_control: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorOnlySummary {
    pub rule_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub user_id: String,
    pub built_at: Timestamp,
    pub span_days: i64,
    pub n_events: usize,
    pub verified: Vec<RuleSummary>,
    pub prior_only: Vec<PriorOnlySummary>,
    pub has_preference_profile: bool,
    pub n_preferred_regions: usize,
    pub n_constraints: usize,
    pub seed: u64,
}

impl ModelSummary {
    pub fn of(model: &PersonalFoodModel) -> Self {
        ModelSummary {
            user_id: model.user_id.clone(),
            built_at: model.built_at,
            span_days: model.span.days,
            n_events: model.n_events,
            verified: model
                .biological
                .verified
                .iter()
                .map(|r| RuleSummary {
                    rule_id: r.rule_id.clone(),
                    overall_effect: r.verified.overall_effect,
                    overall_p: r.verified.overall_p,
                    direction: r.verified.overall_direction,
                    metric: r.verified.hypothesis.outcome.metric.clone(),
                    n_contexts: r.verified.contexts.len(),
                    n_treated: r.verified.n_treated,
                    n_control: r.verified.n_control,
                })
                .collect(),
            prior_only: model
                .biological
                .prior_only
                .iter()
                .map(|p| PriorOnlySummary {
                    rule_id: p.rule.rule_id.clone(),
                    reason: p.reason.clone(),
                })
                .collect(),
            has_preference_profile: model.preferential.is_some(),
            n_preferred_regions: model.preferential.as_ref().map_or(0, |p| p.preferred_regions.len()),
            n_constraints: model.static_constraints.len(),
            seed: model.seed,
        }
    }
}

/// Result of posting an event.
#[derive(Clone, Debug, PartialEq)]
pub struct Posted {
    pub outcome: AppendOutcome,
    /// Stored event with any enrichment applied.
    pub event: Event,
    /// `ok`, `pending`, `skipped` or an error code.
    pub enrichment: String,
}

pub struct Engine {
    pub cfg: Config,
    pub store: UserStore,
    registry: Mutex<Option<Arc<ClientRegistry>>>,
}

impl Engine {
    pub fn open(data_dir: &Path, cfg: Config) -> Result<Self, ApiError> {
        let store = UserStore::open(data_dir)?;
        Ok(Engine {
            cfg,
            store,
            registry: Mutex::new(None),
        })
    }

    /// Offline fixture registry, plus the live client when built with the
    /// `live` feature and `PFM_NUTRITION_API_KEY` is set. Built on first use.
    pub fn registry(&self) -> Result<Arc<ClientRegistry>, ApiError> {
        let mut slot = self.registry.lock().expect("registry lock poisoned");
        if let Some(r) = slot.as_ref() {
            return Ok(r.clone());
        }
        let fixtures = resolve(&self.cfg.paths.fixtures_dir);
        let calib_path = resolve(&self.cfg.paths.taste_calibration);
        let calibration = if calib_path.exists() {
            TasteCalibration::load(&calib_path)
                .map_err(|e| ApiError::new(ErrorKind::Internal, "taste_setup", e.to_string()))?
        } else {
            TasteCalibration::default()
        };
        let samples = fixtures.join("taste_samples.jsonl");
        let catalog = if samples.exists() {
            Some(
                TasteCatalog::load(&samples, &fixtures.join("recipes.jsonl"), &calibration, self.cfg.taste.trim)
                    .map_err(|e| ApiError::new(ErrorKind::Internal, "taste_setup", e.to_string()))?,
            )
        } else {
            None
        };
        let cache = EnrichmentCache::new(self.store.cache_dir()).with_ttl_days(self.cfg.enrichment.cache_ttl_days);
        let registry = ClientRegistry::offline(&fixtures, Some(cache), catalog)?;
        #[cfg(feature = "live")]
        let registry = registry.with_live_client_from_env(|k| std::env::var(k).ok(), crate::enrichment::UreqTransport::default());
        let registry = Arc::new(registry.prioritize(&self.cfg.enrichment.client_priority));
        *slot = Some(registry.clone());
        Ok(registry)
    }

    pub fn chronicle(&self, user: &str) -> Result<Chronicle, ApiError> {
        Ok(self.store.chronicle(user)?)
    }

    /// Parses and stores an event for `user`; `enrich_now` resolves its
    /// nutrition before returning.
    pub fn post_event(&self, user: &str, body: Value, enrich_now: bool) -> Result<Posted, ApiError> {
        let event = event_from_value(body, 1)?;
        if event.user_id() != user {
            return Err(ApiError::bad_request(
                "user_mismatch",
                format!("event user_id `{}` does not match `{user}`", event.user_id()),
            ));
        }
        if let Event::Food(f) = &event {
            if f.what.dish.trim().is_empty() && f.what.barcode.is_none() && f.what.ingredients.is_empty() {
                return Err(ApiError::bad_request("empty_food", "food event needs a dish, barcode or ingredients"));
            }
        }
        let outcome = self.store.append_event(user, &event)?;
        let enrichment = match (&event, outcome, enrich_now) {
            (Event::Life(_), _, _) | (_, AppendOutcome::Existing, _) => "skipped".to_string(),
            (_, _, false) => "pending".to_string(),
            (Event::Food(_), AppendOutcome::Created, true) => match self.enrich_event(user, event.id()) {
                Ok(()) => "ok".to_string(),
                Err(e) => e.code,
            },
        };
        let stored = self
            .store
            .chronicle(user)?
            .get(event.id())
            .cloned()
            .expect("event was just stored");
        Ok(Posted {
            outcome,
            event: stored,
            enrichment,
        })
    }

    pub fn enrich_event(&self, user: &str, event_id: &str) -> Result<(), ApiError> {
        let raw = self.store.raw_chronicle(user)?;
        let Some(Event::Food(f)) = raw.get(event_id) else {
            return Err(ApiError::new(ErrorKind::NotFound, "unknown_event", format!("no food event `{event_id}`")));
        };
        let registry = self.registry()?;
        let record = enrich(f, &registry, self.cfg.now())?;
        self.store.append_enrichment(user, &record)?;
        Ok(())
    }

    /// Enriches every food event that has neither stored enrichment nor
    /// logged nutrition. Returns (enriched, failed) ids.
    pub fn enrich_pending(&self, user: &str) -> Result<(Vec<String>, Vec<(String, String)>), ApiError> {
        let raw = self.store.raw_chronicle(user)?;
        let done = self.store.enrichments(user)?;
        let mut ok = Vec::new();
        let mut failed = Vec::new();
        for e in raw.events() {
            let Event::Food(f) = e else { continue };
            if done.contains_key(&f.event_id) || f.why.nutrition.is_some() {
                continue;
            }
            match self.enrich_event(user, &f.event_id) {
                Ok(()) => ok.push(f.event_id.clone()),
                Err(err) => failed.push((f.event_id.clone(), err.code)),
            }
        }
        Ok((ok, failed))
    }

    pub fn query(
        &self,
        user: &str,
        from: Option<Timestamp>,
        to: Option<Timestamp>,
        streams: Option<Vec<Stream>>,
    ) -> Result<Vec<Event>, ApiError> {
        let c = self.chronicle(user)?;
        let from = from.unwrap_or(Timestamp(i64::MIN));
        let to = to.unwrap_or(Timestamp(i64::MAX));
        Ok(c.window_query(from, to, streams.as_deref())?.into_iter().cloned().collect())
    }

    pub fn heatmap(&self, user: &str, a: &str, b: &str, window: &str) -> Result<Heatmap, ApiError> {
        let rows: CategorySpec = a.parse()?;
        let cols: CategorySpec = b.parse()?;
        let window_ms = parse_duration_ms(window)
            .ok_or_else(|| ApiError::bad_request("invalid_window", format!("cannot parse window `{window}`")))?;
        let c = self.chronicle(user)?;
        Ok(cooccurrence_matrix(&rows, &cols, window_ms, &c)?)
    }

    pub fn verify(&self, user: &str, hypothesis: Value) -> Result<VerifiedRule, ApiError> {
        let h: Hypothesis = serde_json::from_value(hypothesis)
            .map_err(|e| ApiError::bad_request("invalid_hypothesis", e.to_string()))?;
        let c = self.chronicle(user)?;
        let params = VerifyParams::from_config(&self.cfg.mining, self.cfg.seed);
        Ok(verify(&h, &c, &params)?)
    }

    /// Builds, saves and summarizes the model.
    pub fn build_model(&self, user: &str) -> Result<ModelSummary, ApiError> {
        let c = self.chronicle(user)?;
        let rules = seed_rulebase(&resolve(&self.cfg.paths.knowledge_rules))?;
        let constraints = self.store.constraints(user)?;
        let model = build_model(&c, &rules, constraints, &self.cfg)?;
        self.store.save_model(&model)?;
        Ok(ModelSummary::of(&model))
    }

    pub fn model(&self, user: &str) -> Result<PersonalFoodModel, ApiError> {
        self.store
            .load_model(user)?
            .ok_or_else(|| RecommendError::NoModel(user.to_string()).into())
    }

    pub fn recommend(&self, user: &str, request: Value) -> Result<Recommendation, ApiError> {
        let mut request: RecommendationRequest = serde_json::from_value(request)
            .map_err(|e| ApiError::bad_request("invalid_request", e.to_string()))?;
        if request.user_id != user {
            return Err(ApiError::bad_request(
                "user_mismatch",
                format!("request user_id `{}` does not match `{user}`", request.user_id),
            ));
        }
        let model = self.model(user)?;
        if request.candidates.iter().any(|c| c.region.is_none() || c.nutrition.is_none()) {
            let registry = self.registry()?;
            for c in &mut request.candidates {
                if c.region.is_none() {
                    c.region = registry.taste_catalog().and_then(|cat| cat.region_for(&c.dish_id));
                }
                if c.nutrition.is_none() {
                    let probe = candidate_event(user, c, &request.context);
                    c.nutrition = enrich(&probe, &registry, self.cfg.now()).ok().map(|r| r.nutrition);
                }
            }
        }
        let defaults = Weights {
            w_pref: self.cfg.recommend.w_pref,
            w_health: self.cfg.recommend.w_health,
        };
        Ok(recommend(&request, &model, defaults, self.cfg.recommend.soft_penalty)?)
    }
}
