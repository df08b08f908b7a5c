use super::{ChatMessage, LmError, Role};
use crate::render::Image;

/// Bumped whenever any template text below changes.
pub const TEMPLATE_VERSION: &str = "evocad-prompts/1";

/// The CAD language the generator is asked to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CadLanguage {
    pub name: &'static str,
    /// Info string used on fenced code blocks.
    pub fence: &'static str,
    pub summary: &'static str,
}

pub const CSG: CadLanguage = CadLanguage {
    name: "csg",
    fence: "csg",
    summary: "\
csg, a small extrusion language. A program is a list of parts. Each part extrudes one outline along z between two heights and may have straight through-holes:
part z <z0> <z1> { <shape> [at <x> <y>]; hole <shape> at <x> <y>; ... }
Shapes are rect <w> <h> (centered), circ <r> and poly <x1> <y1> <x2> <y2> ... (at least three corners).
Holes must lie strictly inside the outline and must not touch each other. Parts must not touch: stack them in z or keep their outlines apart.
Lines starting with # are comments.",
};

pub const CADQUERY: CadLanguage = CadLanguage {
    name: "cadquery",
    fence: "python",
    summary: "\
CadQuery, a Python library for parametric CAD. Import cadquery as cq, build a single solid and bind it to a variable named result.",
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Init,
    Describe,
    Rank,
    Crossover,
    Mutation,
    SelfDebug,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Init => "init",
            Task::Describe => "describe",
            Task::Rank => "rank",
            Task::Crossover => "crossover",
            Task::Mutation => "mutation",
            Task::SelfDebug => "selfdebug",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Task::Init, Task::Describe, Task::Rank, Task::Crossover, Task::Mutation, Task::SelfDebug]
            .into_iter()
            .find(|t| t.as_str() == s)
    }
}

/// The task named on the first line of the leading system message.
pub fn task_of(messages: &[ChatMessage]) -> Option<Task> {
    let first = messages.iter().find(|m| m.role == Role::System)?;
    let line = first.text.lines().next()?;
    Task::parse(line.strip_prefix("Task: ")?.trim())
}

/// A parent program together with how the describer saw it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parent {
    pub code: String,
    pub description: String,
}

fn system(task: Task, body: &str) -> ChatMessage {
    ChatMessage::system(format!("Task: {}\n{body}", task.as_str()))
}

fn coder_system(task: Task, lang: &CadLanguage) -> ChatMessage {
    system(
        task,
        &format!(
            "You are a CAD engineer who writes programs that build 3D objects.\n\nTarget language: {}\n\nReply with exactly one fenced ```{} code block and nothing else.",
            lang.summary, lang.fence
        ),
    )
}

fn request(user_prompt: &str) -> String {
    format!("<<<\n{}\n>>>", user_prompt.trim())
}

fn fenced(lang: &CadLanguage, code: &str) -> String {
    format!("```{}\n{}\n```", lang.fence, code.trim_end())
}

pub fn build_init_prompt(lang: &CadLanguage, user_prompt: &str, shots: &[String]) -> Vec<ChatMessage> {
    let mut user = String::new();
    if !shots.is_empty() {
        user.push_str("Here are some example programs.\n\n");
        for (i, shot) in shots.iter().enumerate() {
            user.push_str(&format!("Example {}:\n{}\n\n", i + 1, fenced(lang, shot)));
        }
    }
    user.push_str(&format!("Write a program for this request:\n{}", request(user_prompt)));
    vec![coder_system(Task::Init, lang), ChatMessage::user(user)]
}

const DESCRIBE_TEXT: &str = "\
The image shows one object from four directions: isometric (top left), front (top right), top (bottom left) and right (bottom right).
Reason step by step. First name the overall shape. Then list its separate parts. Then count every hole that goes through the object, checking each view.
End with a single paragraph that starts with \"Description:\" and describes the object.";

pub fn build_describe_prompt(img: &Image) -> Vec<ChatMessage> {
    vec![
        system(Task::Describe, "You are an expert at reading technical drawings."),
        ChatMessage::user(DESCRIBE_TEXT).with_image(img.clone()),
    ]
}

pub fn build_rank_prompt(user_prompt: &str, descriptions: &[(u64, String)]) -> Vec<ChatMessage> {
    let mut user = format!("Request:\n{}\n\nObjects:\n", request(user_prompt));
    for (id, text) in descriptions {
        user.push_str(&format!("[id {id}] {}\n", text.trim().replace('\n', " ")));
    }
    user.push_str("\nOrder all objects from the best match to the worst. Reply with only a JSON array of their ids, such as [7, 2, 5].");
    vec![
        system(
            Task::Rank,
            "You judge how well objects match a design request, using only their written descriptions.",
        ),
        ChatMessage::user(user),
    ]
}

pub fn build_crossover_prompt(
    lang: &CadLanguage,
    user_prompt: &str,
    a: &Parent,
    b: &Parent,
) -> Vec<ChatMessage> {
    let user = format!(
        "Request:\n{}\n\nProgram A:\n{}\nHow it looks: {}\n\nProgram B:\n{}\nHow it looks: {}\n\n\
Compare both programs against the request: what they share, where each fits it well and where each falls short. \
Then write one program that merges the strong points of both.",
        request(user_prompt),
        fenced(lang, &a.code),
        a.description.trim(),
        fenced(lang, &b.code),
        b.description.trim(),
    );
    vec![coder_system(Task::Crossover, lang), ChatMessage::user(user)]
}

pub fn build_mutation_prompt(lang: &CadLanguage, code: &str, user_prompt: &str) -> Vec<ChatMessage> {
    let user = format!(
        "Request:\n{}\n\nProgram:\n{}\n\nImprove this program so the object matches the request more closely. Change whatever contradicts the request.",
        request(user_prompt),
        fenced(lang, code),
    );
    vec![coder_system(Task::Mutation, lang), ChatMessage::user(user)]
}

pub fn build_selfdebug_prompt(
    lang: &CadLanguage,
    code: &str,
    compiler_error: &str,
    user_prompt: &str,
) -> Vec<ChatMessage> {
    let user = format!(
        "Request:\n{}\n\nThis program failed to build:\n{}\n\nError output:\n{}\n\nReturn a corrected program.",
        request(user_prompt),
        fenced(lang, code),
        compiler_error.trim_end(),
    );
    vec![coder_system(Task::SelfDebug, lang), ChatMessage::user(user)]
}

/// Body of the first fenced block, or the whole trimmed response if there is
/// none.
pub fn extract_code(response: &str) -> Result<String, LmError> {
    let code = match response.find("```") {
        Some(open) => {
            let after = &response[open + 3..];
            let body = after.find('\n').map_or("", |nl| &after[nl + 1..]);
            let body = match body.find("```") {
                Some(close) => &body[..close],
                None => body,
            };
            body.strip_suffix('\n').unwrap_or(body).to_string()
        }
        None => response.trim().to_string(),
    };
    if code.trim().is_empty() {
        return Err(LmError::EmptyResponse);
    }
    Ok(code)
}

/// The final paragraph of a step-by-step description, if it was marked.
pub fn extract_description(response: &str) -> String {
    match response.rfind("Description:") {
        Some(i) => response[i + "Description:".len()..].trim().to_string(),
        None => response.trim().to_string(),
    }
}
