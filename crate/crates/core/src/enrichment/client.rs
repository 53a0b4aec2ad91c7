//! Nutrition sources behind a single `resolve` contract.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::nutrition::NutritionFacts;
use super::{normalize_query, EnrichError};

/// What a client is asked to resolve.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum FoodQuery {
    Dish(String),
    Barcode(String),
    Item(String),
}

impl FoodQuery {
    /// Stable cache key; dish names are normalized first.
    pub fn cache_key(&self) -> String {
        match self {
            FoodQuery::Dish(d) => format!("dish:{}", normalize_query(d)),
            FoodQuery::Barcode(b) => format!("barcode:{b}"),
            FoodQuery::Item(i) => format!("item:{i}"),
        }
    }
}

/// A client's answer: nutrition per 100 g plus a default serving weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemNutrition {
    pub item_id: String,
    pub serving_g: f64,
    pub per_100g: NutritionFacts,
}

impl ItemNutrition {
    pub fn for_grams(&self, grams: f64) -> NutritionFacts {
        self.per_100g.scaled(grams / 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClientError {
    #[error("client unavailable: {0}")]
    Unavailable(String),
    #[error("bad response: {0}")]
    BadResponse(String),
}

pub trait NutritionClient: Send + Sync {
    fn label(&self) -> &str;

    /// `Ok(None)` means the client does not know the food.
    fn resolve(&self, query: &FoodQuery) -> Result<Option<ItemNutrition>, ClientError>;
}

/// Exact-match barcode index.
#[derive(Clone, Debug, Default)]
pub struct BarcodeDb {
    codes: HashMap<String, String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BarcodeRecord {
    pub barcode: String,
    pub item_id: String,
}

impl BarcodeDb {
    pub fn from_records(records: impl IntoIterator<Item = BarcodeRecord>) -> Self {
        BarcodeDb {
            codes: records.into_iter().map(|r| (r.barcode, r.item_id)).collect(),
        }
    }

    pub fn insert(&mut self, code: &str, item_id: &str) {
        self.codes.insert(code.to_string(), item_id.to_string());
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

/// Digit string of length 8 to 14 (EAN-8 through GTIN-14).
pub fn is_well_formed_barcode(code: &str) -> bool {
    (8..=14).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_digit())
}

pub fn lookup_barcode(code: &str, db: &BarcodeDb) -> Result<String, EnrichError> {
    if !is_well_formed_barcode(code) {
        return Err(EnrichError::MalformedBarcode(code.to_string()));
    }
    db.codes.get(code).cloned().ok_or_else(|| EnrichError::NotFound(code.to_string()))
}

/// One line of `nutrition.jsonl`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NutritionRecord {
    pub item_id: String,
    #[serde(default)]
    pub names: Vec<String>,
    pub serving_g: f64,
    pub per_100g: NutritionFacts,
}

/// Offline client over the fixture files. Never touches the network.
#[derive(Clone, Debug, Default)]
pub struct FixtureClient {
    items: BTreeMap<String, ItemNutrition>,
    names: BTreeMap<String, String>,
    barcodes: BarcodeDb,
}

pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, EnrichError> {
    let text = std::fs::read_to_string(path).map_err(|e| EnrichError::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EnrichError::Fixture(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

impl FixtureClient {
    pub fn new(records: Vec<NutritionRecord>, barcodes: BarcodeDb) -> Result<Self, EnrichError> {
        let mut client = FixtureClient {
            barcodes,
            ..Default::default()
        };
        for r in records {
            let problems = r.per_100g.violations();
            if !problems.is_empty() {
                return Err(EnrichError::Fixture(format!("{}: {}", r.item_id, problems.join("; "))));
            }
            client.names.insert(normalize_query(&r.item_id), r.item_id.clone());
            for n in &r.names {
                client.names.insert(normalize_query(n), r.item_id.clone());
            }
            client.items.insert(
                r.item_id.clone(),
                ItemNutrition {
                    item_id: r.item_id,
                    serving_g: r.serving_g,
                    per_100g: r.per_100g,
                },
            );
        }
        Ok(client)
    }

    pub fn load(nutrition_path: &Path, barcodes_path: &Path) -> Result<Self, EnrichError> {
        let records: Vec<NutritionRecord> = read_jsonl(nutrition_path)?;
        let barcodes = if barcodes_path.exists() {
            BarcodeDb::from_records(read_jsonl::<BarcodeRecord>(barcodes_path)?)
        } else {
            BarcodeDb::default()
        };
        Self::new(records, barcodes)
    }

    pub fn barcodes(&self) -> &BarcodeDb {
        &self.barcodes
    }
}

impl NutritionClient for FixtureClient {
    fn label(&self) -> &str {
        "fixture"
    }

    fn resolve(&self, query: &FoodQuery) -> Result<Option<ItemNutrition>, ClientError> {
        let id = match query {
            FoodQuery::Item(id) => Some(id.clone()),
            FoodQuery::Dish(d) => self.names.get(&normalize_query(d)).cloned(),
            FoodQuery::Barcode(b) => lookup_barcode(b, &self.barcodes).ok(),
        };
        Ok(id.and_then(|id| self.items.get(&id).cloned()))
    }
}

/// Minimal HTTP request description handed to a [`Transport`].
#[derive(Clone, Debug, PartialEq)]
pub struct HttpRequest {
    pub method: &'static str,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<String>,
}

/// Network boundary for live clients; tests inject a counting fake.
pub trait Transport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<String, ClientError>;
}

/// Wraps a transport and counts requests.
pub struct CountingTransport<T> {
    inner: T,
    calls: AtomicUsize,
}

impl<T> CountingTransport<T> {
    pub fn new(inner: T) -> Self {
        CountingTransport {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<T: Transport> Transport for CountingTransport<T> {
    fn send(&self, request: &HttpRequest) -> Result<String, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.send(request)
    }
}

impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    fn send(&self, request: &HttpRequest) -> Result<String, ClientError> {
        (**self).send(request)
    }
}

/// Adapter for a Nutritionix-style natural-language nutrients API.
pub struct HttpNutritionClient<T> {
    transport: T,
    base_url: String,
    app_id: String,
    api_key: String,
}

pub const DEFAULT_NUTRITION_API: &str = "https://trackapi.nutritionix.com/v2";

#[derive(Deserialize)]
struct ApiFoods {
    #[serde(default)]
    foods: Vec<ApiFood>,
}

#[derive(Deserialize)]
struct ApiFood {
    food_name: String,
    serving_weight_grams: Option<f64>,
    nf_calories: Option<f64>,
    nf_total_carbohydrate: Option<f64>,
    nf_protein: Option<f64>,
    nf_total_fat: Option<f64>,
    nf_dietary_fiber: Option<f64>,
    nf_sugars: Option<f64>,
}

impl<T: Transport> HttpNutritionClient<T> {
    pub fn new(transport: T, base_url: &str, app_id: &str, api_key: &str) -> Self {
        HttpNutritionClient {
            transport,
            base_url: base_url.trim_end_matches('/').to_string(),
            app_id: app_id.to_string(),
            api_key: api_key.to_string(),
        }
    }

    fn headers(&self) -> Vec<(String, String)> {
        vec![
            ("x-app-id".into(), self.app_id.clone()),
            ("x-app-key".into(), self.api_key.clone()),
            ("content-type".into(), "application/json".into()),
        ]
    }

    fn parse(body: &str) -> Result<Option<ItemNutrition>, ClientError> {
        let parsed: ApiFoods = serde_json::from_str(body).map_err(|e| ClientError::BadResponse(e.to_string()))?;
        let Some(food) = parsed.foods.into_iter().next() else {
            return Ok(None);
        };
        let grams = food.serving_weight_grams.filter(|g| *g > 0.0).unwrap_or(100.0);
        let per = |v: Option<f64>| v.map(|x| x * 100.0 / grams);
        Ok(Some(ItemNutrition {
            item_id: normalize_query(&food.food_name),
            serving_g: grams,
            per_100g: NutritionFacts {
                kcal: per(food.nf_calories).unwrap_or(0.0),
                carbohydrate_g: per(food.nf_total_carbohydrate),
                protein_g: per(food.nf_protein),
                fat_g: per(food.nf_total_fat),
                fiber_g: per(food.nf_dietary_fiber),
                sugar_g: per(food.nf_sugars),
                ..Default::default()
            },
        }))
    }
}

impl<T: Transport> NutritionClient for HttpNutritionClient<T> {
    fn label(&self) -> &str {
        "nutritionix"
    }

    fn resolve(&self, query: &FoodQuery) -> Result<Option<ItemNutrition>, ClientError> {
        let request = match query {
            FoodQuery::Dish(d) | FoodQuery::Item(d) => HttpRequest {
                method: "POST",
                url: format!("{}/natural/nutrients", self.base_url),
                headers: self.headers(),
                body: Some(serde_json::json!({ "query": d }).to_string()),
            },
            FoodQuery::Barcode(b) => HttpRequest {
                method: "GET",
                url: format!("{}/search/item?upc={b}", self.base_url),
                headers: self.headers(),
                body: None,
            },
        };
        let body = self.transport.send(&request)?;
        Self::parse(&body)
    }
}

/// Blocking transport over `ureq`.
#[cfg(feature = "live")]
pub struct UreqTransport {
    agent: ureq::Agent,
}

#[cfg(feature = "live")]
impl Default for UreqTransport {
    fn default() -> Self {
        UreqTransport {
            agent: ureq::Agent::new_with_defaults(),
        }
    }
}

#[cfg(feature = "live")]
impl Transport for UreqTransport {
    fn send(&self, request: &HttpRequest) -> Result<String, ClientError> {
        let unavailable = |e: ureq::Error| ClientError::Unavailable(e.to_string());
        let mut response = if request.method == "POST" {
            let mut req = self.agent.post(&request.url);
            for (k, v) in &request.headers {
                req = req.header(k.as_str(), v.as_str());
            }
            req.send(request.body.clone().unwrap_or_default()).map_err(unavailable)?
        } else {
            let mut req = self.agent.get(&request.url);
            for (k, v) in &request.headers {
                req = req.header(k.as_str(), v.as_str());
            }
            req.call().map_err(unavailable)?
        };
        response.body_mut().read_to_string().map_err(unavailable)
    }
}
