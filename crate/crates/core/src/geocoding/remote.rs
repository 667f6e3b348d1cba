use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{GeocodeCache, GeocodeError, GeocodeResult, GeocodeSource, Geocoder, Taxonomy, UNKNOWN};
use crate::geo::GeoPoint;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Blocking HTTP GET. `Err` means the request never produced a response.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str, user_agent: &str) -> Result<HttpResponse, String>;
}

pub trait Clock: Send + Sync {
    /// Monotonic time since an arbitrary origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d)
    }
}

/// Virtual clock whose `sleep` just advances time.
#[derive(Debug, Default)]
pub struct MockClock {
    now: Mutex<Duration>,
}

impl MockClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().expect("clock lock") += d;
    }
}

impl Clock for MockClock {
    fn now(&self) -> Duration {
        *self.now.lock().expect("clock lock")
    }

    fn sleep(&self, d: Duration) {
        self.advance(d)
    }
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).timeout_global(Some(timeout)).build().into();
        UreqTransport { agent }
    }
}

impl Transport for UreqTransport {
    fn get(&self, url: &str, user_agent: &str) -> Result<HttpResponse, String> {
        let mut resp = self.agent.get(url).header("User-Agent", user_agent).call().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemoteConfig {
    pub base_url: String,
    pub user_agent: String,
    pub requests_per_second: f64,
    /// Total tries per lookup, including the first.
    pub max_attempts: usize,
    pub backoff_base_secs: f64,
    pub timeout_secs: f64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            base_url: "https://nominatim.openstreetmap.org".into(),
            user_agent: concat!("crimespot/", env!("CARGO_PKG_VERSION")).into(),
            requests_per_second: 1.0,
            max_attempts: 3,
            backoff_base_secs: 1.0,
            timeout_secs: 30.0,
        }
    }
}

impl RemoteConfig {
    pub fn reverse_url(&self, p: GeoPoint) -> String {
        format!("{}/reverse?format=jsonv2&lat={}&lon={}", self.base_url.trim_end_matches('/'), p.lat(), p.lon())
    }

    fn min_interval(&self) -> Duration {
        if self.requests_per_second > 0.0 {
            Duration::from_secs_f64(1.0 / self.requests_per_second)
        } else {
            Duration::ZERO
        }
    }
}

#[derive(Deserialize)]
struct ReverseBody {
    #[serde(rename = "type")]
    osm_type: Option<String>,
    class: Option<String>,
    category: Option<String>,
    error: Option<String>,
}

struct State {
    last_request: Option<Duration>,
    cache: Option<GeocodeCache>,
}

/// Nominatim-compatible reverse geocoder. Requests are serialized through a
/// rate limiter; failed requests are retried with exponential backoff.
pub struct RemoteGeocoder {
    config: RemoteConfig,
    taxonomy: Taxonomy,
    transport: Box<dyn Transport>,
    clock: Box<dyn Clock>,
    state: Mutex<State>,
}

impl RemoteGeocoder {
    pub fn new(config: RemoteConfig, taxonomy: Taxonomy, transport: Box<dyn Transport>, clock: Box<dyn Clock>, cache: Option<GeocodeCache>) -> Self {
        RemoteGeocoder { config, taxonomy, transport, clock, state: Mutex::new(State { last_request: None, cache }) }
    }

    pub fn with_defaults(config: RemoteConfig, taxonomy: Taxonomy, cache: Option<GeocodeCache>) -> Self {
        let transport = UreqTransport::new(Duration::from_secs_f64(config.timeout_secs));
        Self::new(config, taxonomy, Box::new(transport), Box::<SystemClock>::default(), cache)
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    fn wait_turn(&self, state: &mut State) {
        if let Some(last) = state.last_request {
            let ready = last + self.config.min_interval();
            let now = self.clock.now();
            if ready > now {
                self.clock.sleep(ready - now);
            }
        }
        state.last_request = Some(self.clock.now());
    }

    fn fetch(&self, p: GeoPoint, state: &mut State) -> Result<GeocodeResult, GeocodeError> {
        let url = self.config.reverse_url(p);
        let attempts = self.config.max_attempts.max(1);
        let mut last_err = None;
        for attempt in 1..=attempts {
            if attempt > 1 {
                let backoff = self.config.backoff_base_secs * 2f64.powi(attempt as i32 - 2);
                self.clock.sleep(Duration::from_secs_f64(backoff));
            }
            self.wait_turn(state);
            match self.transport.get(&url, &self.config.user_agent) {
                Ok(resp) if resp.status == 200 => return self.parse(&resp.body),
                Ok(resp) if resp.status == 429 => last_err = Some(GeocodeError::RateLimited { attempts: attempt }),
                Ok(resp) if resp.status >= 500 => last_err = Some(GeocodeError::Http { status: resp.status, attempts: attempt }),
                Ok(resp) => return Err(GeocodeError::Http { status: resp.status, attempts: attempt }),
                Err(message) => last_err = Some(GeocodeError::Network { attempts: attempt, message }),
            }
        }
        Err(last_err.expect("at least one attempt"))
    }

    fn parse(&self, body: &str) -> Result<GeocodeResult, GeocodeError> {
        let parsed: ReverseBody = serde_json::from_str(body).map_err(|e| GeocodeError::Body(e.to_string()))?;
        if let Some(e) = parsed.error {
            return Err(GeocodeError::NoResult(e));
        }
        let osm_type = parsed.osm_type.ok_or_else(|| GeocodeError::Body("missing `type` field".into()))?;
        let class = parsed.class.or(parsed.category).ok_or_else(|| GeocodeError::Body("missing `class` field".into()))?;
        // the type decides when the taxonomy knows it, keeping category
        // consistent with type; otherwise fall back to the reported class
        let osm_category = if self.taxonomy.contains_type(&osm_type) {
            self.taxonomy.category_of(&osm_type).to_string()
        } else if self.taxonomy.is_category(&class) {
            class
        } else {
            UNKNOWN.to_string()
        };
        Ok(GeocodeResult { osm_type, osm_category, source: GeocodeSource::Remote, distance_km: None })
    }
}

impl Geocoder for RemoteGeocoder {
    fn reverse(&self, p: GeoPoint) -> Result<GeocodeResult, GeocodeError> {
        let mut state = self.state.lock().expect("geocoder lock");
        if let Some(hit) = state.cache.as_ref().and_then(|c| c.get(p)) {
            return Ok(hit);
        }
        let result = self.fetch(p, &mut state)?;
        if let Some(cache) = state.cache.as_mut() {
            cache.put(p, &result)?;
        }
        Ok(result)
    }
}
