use serde::Serialize;

use super::{GenerationPrompt, GeneratorBackend, ShotDescriptor};
use crate::backend::{BackendError, HttpClient};

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a GenerationPrompt,
    seed: u64,
}

/// Remote generator: `POST {"prompt": {...}, "seed": n}` answered with a
/// shot descriptor.
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    client: HttpClient,
}

impl HttpGenerator {
    pub fn new(client: HttpClient) -> Self {
        Self { client }
    }
}

impl GeneratorBackend for HttpGenerator {
    fn generate(&self, prompt: &GenerationPrompt, seed: u64) -> Result<ShotDescriptor, BackendError> {
        let descriptor: ShotDescriptor = self.client.post_json(&GenerateRequest { prompt, seed })?;
        if descriptor.shot_id != prompt.shot_id {
            return Err(BackendError::InvalidResponse(format!(
                "descriptor for shot {} returned for shot {}",
                descriptor.shot_id, prompt.shot_id
            )));
        }
        Ok(descriptor)
    }
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;
    use crate::backend::test_server::serve;
    use crate::generation::{build_prompt, reference_descriptor};
    use crate::planner::fixtures::four_shot_plan;
    use crate::planner::validate_plan;

    #[test]
    fn posts_prompt_and_seed() {
        let plan = four_shot_plan();
        let states = validate_plan(&plan).unwrap();
        let shot = plan.shot(2).unwrap();
        let reply = serde_json::to_string(&reference_descriptor(shot, &states[1])).unwrap();
        let (url, server) = serve(vec![(200, reply), (200, "{\"bogus\":1}".into())]);
        let gen = HttpGenerator::new(HttpClient::new(url, None, Duration::from_secs(5)));
        let prompt = build_prompt(shot, &states[1], None);
        let d = gen.generate(&prompt, 2002).unwrap();
        assert_eq!(d.shot_id, 2);
        let err = gen.generate(&prompt, 2003).unwrap_err();
        assert!(matches!(err, BackendError::InvalidResponse(_)), "{err:?}");
        let captured = server.join().unwrap();
        let body: serde_json::Value = serde_json::from_str(&captured[0].body).unwrap();
        assert_eq!(body["seed"], 2002);
        assert_eq!(body["prompt"]["shot_id"], 2);
        assert_eq!(body["prompt"]["planned_action"]["type"], "derive");
    }
}
