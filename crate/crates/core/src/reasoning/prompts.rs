//! System prompts for the remote backend, one per role. Every prompt ends
//! with the response contract: a single fenced `json` block.

use super::{ReasoningRole, RequestPayload};

const CONTRACT: &str = "Reply with exactly one fenced ```json block containing the object described above and nothing else.";

fn role_prompt(role: ReasoningRole) -> &'static str {
    match role {
        ReasoningRole::CoreBreakdown => {
            "You manage the task list of a mobile inspection robot on a building floor. \
             Split the operator command into tasks in the order they must run. Each task has a \
             zone (a drawing label such as 12C4, a description such as \"south hallway\", or an \
             expression such as \"center between 12C1 and 12C2\") and an instruction saying what \
             to inspect there. Optionally add a target predicate \
             {\"class\": str, \"attributes\": [{\"tag\": str, \"polarity\": \"required\"|\"forbidden\"}], \
             \"relations\": [{\"kind\": \"blocking\"|\"carrying\"|\"carried_by\"|\"next_to\", \"referent\": {\"named\": str} | {\"kind\": {\"class\": str, \"attributes\": [str]}}}]}.\n\
             Object: {\"tasks\": [{\"zone\": str, \"instruction\": str, \"target\": predicate?}]}"
        }
        ReasoningRole::CoreModify => {
            "You manage the task list of a mobile inspection robot. Tasks are already queued and one \
             may be running. Turn the new operator command into exactly one edit of the list. \
             Edits: {\"op\": \"append\", \"tasks\": [...], \"front\": bool} adds tasks (front=true when they \
             must run before everything else); {\"op\": \"cancel\", \"task_id\": str}; \
             {\"op\": \"reorder\", \"order\": [every task id in the new order]}; \
             {\"op\": \"modify\", \"task_id\": str, \"zone\"?: str, \"instruction\"?: str, \"target\"?: predicate}.\n\
             Object: {\"edit\": edit}"
        }
        ReasoningRole::NavDescribe => {
            "You are reading labels on a construction drawing. Write one or two sentences describing \
             where the given label lies on the floor: its kind, which part of the map it is in \
             (north, southwest, central, ...) and which labels are close to it.\n\
             Object: {\"description\": str}"
        }
        ReasoningRole::NavSelect => {
            "A robot must go to a place described in words. Compare the request with the label \
             descriptions and pick the single best label. Use null when none fits.\n\
             Object: {\"label\": str | null, \"reasoning\": str}"
        }
        ReasoningRole::PosDecide => {
            "You guide a robot toward an inspection target using its camera view. The view is split \
             into left, center and right thirds. Find the object that satisfies the instruction \
             (ignore look-alikes that fail a stated attribute or relation). Report where it is and \
             whether it is too far (over 0.8 m), too close (under 0.5 m) or at an appropriate \
             distance. If it is not in view, use not_visible for both fields.\n\
             Object: {\"direction\": \"left\"|\"right\"|\"center\"|\"not_visible\", \
             \"distance\": \"too_far\"|\"too_close\"|\"appropriate\"|\"not_visible\", \"reasoning\": str}"
        }
    }
}

pub fn system_prompt(role: ReasoningRole) -> String {
    format!("{}\n\n{CONTRACT}", role_prompt(role))
}

/// The user turn: the role payload as pretty JSON.
pub fn user_message(payload: &RequestPayload) -> String {
    let body = serde_json::to_string_pretty(payload).expect("payloads serialize");
    format!("Input:\n```json\n{body}\n```")
}
