//! Attaches nutrition, taste, weather and place metadata to food events.
//!
//! Clients are consulted in priority order and the first one that resolves a
//! food wins. Every client answer goes through the on-disk cache first, so a
//! repeated enrichment is served locally and yields the same record.

mod cache;
mod client;
mod nutrition;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use cache::{CacheEntry, EnrichmentCache, DEFAULT_TTL_DAYS};
#[cfg(feature = "live")]
pub use client::UreqTransport;
pub use client::{
    is_well_formed_barcode, lookup_barcode, BarcodeDb, BarcodeRecord, ClientError, CountingTransport, FixtureClient,
    FoodQuery, HttpNutritionClient, HttpRequest, ItemNutrition, NutritionClient, NutritionRecord, Transport,
    DEFAULT_NUTRITION_API,
};
pub use nutrition::{Micronutrient, NutritionFacts, NUTRITION_FIELDS, REQUIRED_MICRONUTRIENTS};

use crate::chronicle::{FoodEvent, Provenance};
use crate::taste::{TasteCatalog, TasteRegion};
use crate::time::Timestamp;

/// Environment variable holding the live nutrition API key.
pub const API_KEY_ENV: &str = "PFM_NUTRITION_API_KEY";
pub const APP_ID_ENV: &str = "PFM_NUTRITION_APP_ID";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnrichError {
    #[error("could not resolve food for event {0}")]
    UnresolvedFood(String),
    #[error("nutrition client unavailable: {0}")]
    ClientUnavailable(String),
    #[error("barcode {0} not found")]
    NotFound(String),
    #[error("malformed barcode `{0}`: expected 8-14 digits")]
    MalformedBarcode(String),
    #[error("io: {0}")]
    Io(String),
    #[error("fixture: {0}")]
    Fixture(String),
}

/// Lowercase, trim and collapse internal whitespace.
pub fn normalize_query(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weather {
    pub temp_c: f64,
    pub condition: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaceInfo {
    pub category: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentRecord {
    pub event_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_id: Option<String>,
    pub nutrition: NutritionFacts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taste: Option<TasteRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weather: Option<Weather>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub place: Option<PlaceInfo>,
    pub fetched_at: Timestamp,
    pub client: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct WeatherRecord {
    date: String,
    temp_c: f64,
    condition: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PlaceRecord {
    place: String,
    category: String,
}

/// Offline weather-by-date and place-category lookups.
#[derive(Clone, Debug, Default)]
pub struct ContextFixtures {
    weather: BTreeMap<String, Weather>,
    places: BTreeMap<String, String>,
}

impl ContextFixtures {
    pub fn load(weather_path: &Path, places_path: &Path) -> Result<Self, EnrichError> {
        let mut out = ContextFixtures::default();
        if weather_path.exists() {
            for r in client::read_jsonl::<WeatherRecord>(weather_path)? {
                out.weather.insert(
                    r.date,
                    Weather {
                        temp_c: r.temp_c,
                        condition: r.condition,
                    },
                );
            }
        }
        if places_path.exists() {
            for r in client::read_jsonl::<PlaceRecord>(places_path)? {
                out.places.insert(normalize_query(&r.place), r.category);
            }
        }
        Ok(out)
    }

    pub fn weather_on(&self, date: &str) -> Option<Weather> {
        self.weather.get(date).cloned()
    }

    pub fn place_category(&self, place: &str) -> Option<String> {
        self.places.get(&normalize_query(place)).cloned()
    }
}

/// Ordered nutrition clients plus the local lookups and cache they share.
#[derive(Default)]
pub struct ClientRegistry {
    clients: Vec<Box<dyn NutritionClient>>,
    barcodes: BarcodeDb,
    cache: Option<EnrichmentCache>,
    taste: Option<TasteCatalog>,
    context: ContextFixtures,
}

impl ClientRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_client(mut self, client: Box<dyn NutritionClient>) -> Self {
        self.clients.push(client);
        self
    }

    pub fn with_barcodes(mut self, barcodes: BarcodeDb) -> Self {
        self.barcodes = barcodes;
        self
    }

    pub fn with_cache(mut self, cache: EnrichmentCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_taste(mut self, catalog: TasteCatalog) -> Self {
        self.taste = Some(catalog);
        self
    }

    pub fn with_context(mut self, context: ContextFixtures) -> Self {
        self.context = context;
        self
    }

    /// Reorders clients by label according to `priority`; unlisted clients
    /// keep their relative order after the listed ones.
    pub fn prioritize(mut self, priority: &[String]) -> Self {
        self.clients.sort_by_key(|c| {
            priority
                .iter()
                .position(|p| p == c.label())
                .unwrap_or(priority.len())
        });
        self
    }

    pub fn client_labels(&self) -> Vec<String> {
        self.clients.iter().map(|c| c.label().to_string()).collect()
    }

    pub fn taste_catalog(&self) -> Option<&TasteCatalog> {
        self.taste.as_ref()
    }

    /// Offline registry over the fixture directory: nutrition, barcodes,
    /// taste samples/recipes and weather/place lookups.
    pub fn offline(fixtures_dir: &Path, cache: Option<EnrichmentCache>, taste: Option<TasteCatalog>) -> Result<Self, EnrichError> {
        let fixture = FixtureClient::load(&fixtures_dir.join("nutrition.jsonl"), &fixtures_dir.join("barcodes.jsonl"))?;
        let context = ContextFixtures::load(&fixtures_dir.join("weather.jsonl"), &fixtures_dir.join("places.jsonl"))?;
        let mut reg = ClientRegistry::new()
            .with_barcodes(fixture.barcodes().clone())
            .with_client(Box::new(fixture))
            .with_context(context);
        reg.cache = cache;
        reg.taste = taste;
        Ok(reg)
    }

    /// Adds the live HTTP client when an API key is present; without one the
    /// registry stays offline and no transport is ever touched.
    pub fn with_live_client_from_env<T: Transport + 'static>(
        self,
        env: impl Fn(&str) -> Option<String>,
        transport: T,
    ) -> Self {
        match env(API_KEY_ENV) {
            Some(key) if !key.is_empty() => {
                let app_id = env(APP_ID_ENV).unwrap_or_default();
                self.with_client(Box::new(HttpNutritionClient::new(
                    transport,
                    DEFAULT_NUTRITION_API,
                    &app_id,
                    &key,
                )))
            }
            _ => self,
        }
    }

    /// First client answer for `query`, through the cache.
    fn resolve(&self, query: &FoodQuery, now: Timestamp) -> Result<Option<(ItemNutrition, String, Timestamp)>, EnrichError> {
        let key = query.cache_key();
        let mut unavailable = None;
        for client in &self.clients {
            if let Some(cache) = &self.cache {
                if let Some(hit) = cache.get(client.label(), &key, now) {
                    return Ok(Some((hit.response, hit.client, hit.fetched_at)));
                }
            }
            match client.resolve(query) {
                Ok(Some(found)) => {
                    if let Some(cache) = &self.cache {
                        cache.put(&CacheEntry {
                            client: client.label().to_string(),
                            query: key.clone(),
                            fetched_at: now,
                            response: found.clone(),
                        })?;
                    }
                    return Ok(Some((found, client.label().to_string(), now)));
                }
                Ok(None) => {}
                Err(ClientError::Unavailable(msg)) => unavailable = Some(format!("{}: {msg}", client.label())),
                Err(ClientError::BadResponse(msg)) => unavailable = Some(format!("{}: {msg}", client.label())),
            }
        }
        match unavailable {
            Some(msg) => Err(EnrichError::ClientUnavailable(msg)),
            None => Ok(None),
        }
    }
}

struct Resolved {
    nutrition: NutritionFacts,
    client: String,
    fetched_at: Timestamp,
    item_id: Option<String>,
}

fn resolve_ingredients(
    event: &FoodEvent,
    registry: &ClientRegistry,
    now: Timestamp,
) -> Result<Option<Resolved>, EnrichError> {
    let mut total: Option<NutritionFacts> = None;
    let mut clients: Vec<String> = Vec::new();
    let mut fetched_at = Timestamp(i64::MIN);
    for ing in &event.what.ingredients {
        let Some((item, client, at)) = registry.resolve(&FoodQuery::Item(ing.item_id.clone()), now)? else {
            return Ok(None);
        };
        let grams = if ing.grams > 0.0 { ing.grams } else { item.serving_g };
        let part = item.for_grams(grams);
        total = Some(match total {
            Some(t) => t.combined(&part),
            None => part,
        });
        if !clients.contains(&client) {
            clients.push(client);
        }
        fetched_at = fetched_at.max(at);
    }
    Ok(total.map(|nutrition| Resolved {
        nutrition,
        client: clients.join("+"),
        fetched_at,
        item_id: None,
    }))
}

/// Resolves nutrition (and, where known, taste/weather/place) for a food
/// event. The event itself is not modified; see [`apply_enrichment`].
pub fn enrich(event: &FoodEvent, registry: &ClientRegistry, now: Timestamp) -> Result<EnrichmentRecord, EnrichError> {
    let dish = event.what.dish.trim();
    let grams_for = |item: &ItemNutrition| {
        if event.what.quantity_g > 0.0 {
            event.what.quantity_g
        } else {
            item.serving_g
        }
    };

    let mut resolved: Option<Resolved> = None;
    if let Some(code) = event.what.barcode.as_deref().filter(|c| !c.is_empty()) {
        let query = match lookup_barcode(code, &registry.barcodes) {
            Ok(item_id) => FoodQuery::Item(item_id),
            Err(EnrichError::NotFound(_)) => FoodQuery::Barcode(code.to_string()),
            Err(e) => return Err(e),
        };
        if let Some((item, client, at)) = registry.resolve(&query, now)? {
            resolved = Some(Resolved {
                nutrition: item.for_grams(grams_for(&item)),
                client,
                fetched_at: at,
                item_id: Some(item.item_id),
            });
        }
    }
    if resolved.is_none() && !dish.is_empty() {
        if let Some((item, client, at)) = registry.resolve(&FoodQuery::Dish(dish.to_string()), now)? {
            resolved = Some(Resolved {
                nutrition: item.for_grams(grams_for(&item)),
                client,
                fetched_at: at,
                item_id: Some(item.item_id),
            });
        }
    }
    if resolved.is_none() && !event.what.ingredients.is_empty() {
        resolved = resolve_ingredients(event, registry, now)?;
    }
    let Some(resolved) = resolved else {
        return Err(EnrichError::UnresolvedFood(event.event_id.clone()));
    };

    let taste = registry.taste.as_ref().and_then(|catalog| {
        resolved
            .item_id
            .as_deref()
            .and_then(|id| catalog.region_for(id))
            .or_else(|| (!dish.is_empty()).then(|| catalog.region_for(dish)).flatten())
            .or_else(|| {
                let parts: Vec<(String, f64)> =
                    event.what.ingredients.iter().map(|i| (i.item_id.clone(), i.grams)).collect();
                catalog.region_from_ingredients(&parts)
            })
    });
    let weather = registry.context.weather_on(&event.when.eaten_at.date_string(event.when.tz_offset_min));
    let place = (!event.place.place.is_empty())
        .then(|| registry.context.place_category(&event.place.place))
        .flatten()
        .map(|category| PlaceInfo { category });

    Ok(EnrichmentRecord {
        event_id: event.event_id.clone(),
        item_id: resolved.item_id,
        flags: resolved.nutrition.energy_flags(),
        nutrition: resolved.nutrition,
        taste,
        weather,
        place,
        fetched_at: resolved.fetched_at,
        client: resolved.client,
    })
}

/// Copies an enrichment record onto the event, tagging each field Derived.
pub fn apply_enrichment(event: &mut FoodEvent, record: &EnrichmentRecord) {
    event.why.nutrition = Some(record.nutrition.clone());
    if let Some(id) = &record.item_id {
        event.what.item_id = Some(id.clone());
        event.provenance.insert("what.item_id".into(), Provenance::derived(&record.client));
    }
    event
        .provenance
        .insert("nutrition".into(), Provenance::derived(&record.client));
    if let Some(taste) = &record.taste {
        event.why.taste = Some(taste.clone());
        event.provenance.insert("taste".into(), Provenance::derived("taste-catalog"));
    }
    if let Some(weather) = &record.weather {
        event.why.weather = Some(weather.clone());
        event.provenance.insert("weather".into(), Provenance::derived("weather-db"));
    }
    if let Some(place) = &record.place {
        event.place.category = Some(place.category.clone());
        event.provenance.insert("where.category".into(), Provenance::derived("places-db"));
    }
}
