//! HTTP transport: `POST {endpoint}/predict` with the wire JSON. Only a 200
//! status carries a valid prediction.

use std::time::Duration;

use crate::adapter::wire::{response_to_prediction, WireRequest};
use crate::adapter::{AdapterError, ModelPrediction, QaModel};
use crate::corpus::Article;

pub struct HttpModel {
    endpoint: String,
    agent: ureq::Agent,
    timeout: Duration,
    seed: Option<u64>,
    relevance_threshold: f64,
    max_concurrency: usize,
}

impl HttpModel {
    pub fn new(
        endpoint: String,
        timeout: Duration,
        seed: Option<u64>,
        relevance_threshold: f64,
        max_concurrency: usize,
    ) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self {
            endpoint,
            agent,
            timeout,
            seed,
            relevance_threshold,
            max_concurrency,
        }
    }
}

impl QaModel for HttpModel {
    fn predict(
        &self,
        question: &str,
        context: &[Article],
    ) -> Result<ModelPrediction, AdapterError> {
        let request = WireRequest {
            question: question.to_string(),
            context: context.to_vec(),
            seed: self.seed,
        };
        let url = format!("{}/predict", self.endpoint);
        let body = match self.agent.post(&url).send_json(&request) {
            Ok(response) => response
                .into_string()
                .map_err(|e| AdapterError::Transport(format!("reading response body: {e}")))?,
            Err(ureq::Error::Status(code, response)) => {
                let body = response.into_string().unwrap_or_default();
                return Err(AdapterError::Transport(format!(
                    "HTTP {code} from {url}: {}",
                    body.chars().take(200).collect::<String>()
                )));
            }
            Err(ureq::Error::Transport(transport)) => {
                let message = transport.to_string();
                return Err(if message.contains("timed out") || message.contains("timeout") {
                    AdapterError::Timeout(self.timeout)
                } else {
                    AdapterError::Transport(message)
                });
            }
        };
        let response = serde_json::from_str(&body)
            .map_err(|e| AdapterError::protocol(format!("unparseable response: {e}"), &body))?;
        response_to_prediction(response, context, self.relevance_threshold)
            .map_err(|e| AdapterError::protocol(e, &body))
    }

    fn max_concurrency(&self) -> usize {
        self.max_concurrency
    }
}
