//! Prompt templates.
//!
//! Items in a purchase history are written as `Item ID: {id}, Title: {title};`
//! and joined with single spaces. Ranking candidates and retrieval/ranking
//! outputs carry display IDs only.

/// Opening sentence shared by the retrieval, ranking, MIM and BPR templates.
pub const PREAMBLE: &str = "A user has purchased the following Amazon products (arranged in chronological order, from earliest to most recent): ";

pub const RETRIEVAL_QUESTION: &str = "What would the user buy next?";
pub const RANKING_QUESTION: &str =
    "Which of the following candidate items would you recommend the user to buy next? Candidate items are: ";
pub const RATING_LIKES: &str = "A user likes the following Amazon products: ";
pub const RATING_DISLIKES: &str = "The user dislikes the following Amazon products: ";
pub const RATING_DISLIKES_ONLY: &str = "A user dislikes the following Amazon products: ";
pub const RATING_QUESTION: &str =
    "Predict whether the user would like the following item. Answer yes or no. ";
pub const MASK_TOKEN: &str = "[masked item];";
pub const MIM_QUESTION: &str = "What are the masked items, in chronological order?";
pub const BPR_QUESTION: &str = "Which of the following two items would the user buy next? ";

/// An item as it appears in a prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ItemText<'a> {
    pub id: &'a str,
    pub title: &'a str,
}

impl<'a> ItemText<'a> {
    pub fn new(id: &'a str, title: &'a str) -> Self {
        Self { id, title }
    }

    /// `Item ID: {id}, Title: {title}` without the trailing semicolon.
    pub fn bare(&self) -> String {
        format!("Item ID: {}, Title: {}", self.id, self.title)
    }

    pub fn entry(&self) -> String {
        format!("Item ID: {}, Title: {};", self.id, self.title)
    }
}

pub fn item_list<'a, I>(items: I) -> String
where
    I: IntoIterator<Item = &'a ItemText<'a>>,
{
    items.into_iter().map(ItemText::entry).collect::<Vec<_>>().join(" ")
}

pub fn retrieval(history: &[ItemText<'_>]) -> String {
    format!("{PREAMBLE}{} {RETRIEVAL_QUESTION}", item_list(history))
}

pub fn ranking(history: &[ItemText<'_>], candidate_ids: &[&str]) -> String {
    format!(
        "{PREAMBLE}{} {RANKING_QUESTION}{}.",
        item_list(history),
        candidate_ids.join(", ")
    )
}

/// Empty like/dislike sections are left out entirely.
pub fn rating(likes: &[ItemText<'_>], dislikes: &[ItemText<'_>], target: &ItemText<'_>) -> String {
    let mut s = String::new();
    if !likes.is_empty() {
        s.push_str(RATING_LIKES);
        s.push_str(&item_list(likes));
        s.push(' ');
    }
    if !dislikes.is_empty() {
        s.push_str(if likes.is_empty() { RATING_DISLIKES_ONLY } else { RATING_DISLIKES });
        s.push_str(&item_list(dislikes));
        s.push(' ');
    }
    s.push_str(RATING_QUESTION);
    s.push_str(&target.bare());
    s
}

pub fn rating_answer(liked: bool) -> &'static str {
    if liked {
        "yes"
    } else {
        "no"
    }
}

/// `None` slots render as the mask token.
pub fn mim(slots: &[Option<ItemText<'_>>]) -> String {
    let body: Vec<String> = slots
        .iter()
        .map(|s| s.as_ref().map_or_else(|| MASK_TOKEN.to_string(), ItemText::entry))
        .collect();
    format!("{PREAMBLE}{} {MIM_QUESTION}", body.join(" "))
}

pub fn bpr(history: &[ItemText<'_>], choices: [&ItemText<'_>; 2]) -> String {
    format!("{PREAMBLE}{} {BPR_QUESTION}{}", item_list(history), item_list(choices))
}

/// Item-content question for one metadata field.
pub fn content_question(field: &str, id: &str) -> String {
    match field {
        "categories" => format!("What are the categories of {id}?"),
        _ => format!("What's the {field} of {id}?"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_retrieval() {
        let h = [ItemText::new("I1", "Ball")];
        assert_eq!(
            retrieval(&h),
            format!("{PREAMBLE}Item ID: I1, Title: Ball; What would the user buy next?")
        );
    }

    #[test]
    fn rating_without_dislikes() {
        let likes = [ItemText::new("I1", "A"), ItemText::new("I2", "B")];
        let t = ItemText::new("I3", "C");
        let s = rating(&likes, &[], &t);
        assert!(!s.contains("dislikes"));
        assert!(s.ends_with("Answer yes or no. Item ID: I3, Title: C"));
    }

    #[test]
    fn rating_without_likes() {
        let dislikes = [ItemText::new("I1", "A")];
        let s = rating(&[], &dislikes, &ItemText::new("I3", "C"));
        assert!(s.starts_with(RATING_DISLIKES_ONLY));
        assert!(!s.contains(" likes "));
    }

    #[test]
    fn brand_question() {
        assert_eq!(content_question("brand", "I1014"), "What's the brand of I1014?");
    }
}
