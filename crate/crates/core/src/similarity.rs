//! User profiles and the composite social similarity.
//!
//! A profile carries three channels: a TF-IDF publication vector, the follow
//! row plus close-friend row (a close friend is a mutual follow), and three
//! interaction rows (likes, positively classified comments, positively
//! classified reposts) where the diagonal slot holds the user's own total.
//! The unified similarity is the weighted sum of the per-channel scores.
//!
//! Note the interaction channel divides co-counts by the *first* user's own
//! totals, so the unified similarity is not symmetric in general.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimilarityError {
    #[error("corpus vocabulary is empty")]
    EmptyVocabulary,
    #[error("vector dimensions differ ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("profiles built for different user counts ({left} vs {right})")]
    UserCountMismatch { left: usize, right: usize },
    #[error("weight group {0} must contain a positive weight")]
    ZeroWeightGroup(&'static str),
    #[error("weights must be non-negative and finite")]
    BadWeight,
    #[error("unknown user {0}")]
    UnknownUser(u32),
    #[error("user id {user} out of range for {n_users} users")]
    UserOutOfRange { user: u32, n_users: usize },
    #[error("sentiment lexicon is empty")]
    EmptyLexicon,
}

/// Fixed stop-word list used by the bundled tokenizer.
pub const STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "also", "am", "an", "and",
    "any", "are", "as", "at", "be", "because", "been", "before", "being",
    "below", "between", "both", "but", "by", "can", "did", "do", "does",
    "doing", "down", "during", "each", "few", "for", "from", "further", "had",
    "has", "have", "having", "he", "her", "here", "hers", "him", "his", "how",
    "i", "if", "in", "into", "is", "it", "its", "just", "me", "more", "most",
    "my", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
    "other", "our", "ours", "out", "over", "own", "same", "she", "so", "some",
    "such", "than", "that", "the", "their", "theirs", "them", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under",
    "until", "up", "very", "was", "we", "were", "what", "when", "where",
    "which", "while", "who", "whom", "why", "will", "with", "you", "your",
    "yours",
];

fn is_stop_word(token: &str) -> bool {
    STOP_WORDS.binary_search(&token).is_ok()
}

/// Lowercase, split on non-alphanumeric characters, and drop stop words.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lower in ch.to_lowercase() {
                current.push(lower);
            }
        } else if !current.is_empty() {
            tokens.push(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens.retain(|t| !is_stop_word(t));
    tokens
}

/// Keyword vocabulary over per-user documents with document frequencies.
///
/// The vocabulary keeps every cleaned token that appears in at least
/// `min_df` user documents, ordered lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    vocabulary: Vec<String>,
    index: BTreeMap<String, u32>,
    doc_freq: Vec<u32>,
    n_docs: usize,
}

impl Corpus {
    pub fn build(documents: &[Vec<String>], min_df: usize) -> Self {
        let mut df: BTreeMap<&str, u32> = BTreeMap::new();
        for doc in documents {
            let unique: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
            for token in unique {
                *df.entry(token).or_insert(0) += 1;
            }
        }
        let min_df = min_df.max(1) as u32;
        let mut vocabulary = Vec::new();
        let mut doc_freq = Vec::new();
        let mut index = BTreeMap::new();
        for (token, count) in df {
            if count >= min_df {
                index.insert(String::from(token), vocabulary.len() as u32);
                vocabulary.push(String::from(token));
                doc_freq.push(count);
            }
        }
        Self {
            vocabulary,
            index,
            doc_freq,
            n_docs: documents.len(),
        }
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn n_keywords(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }
}

/// Sparse non-negative vector with entries sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn new(dim: usize, mut entries: Vec<(u32, f64)>) -> Self {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_unstable_by_key(|&(i, _)| i);
        Self { dim, entries }
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn dot(&self, other: &Self) -> f64 {
        let mut sum = 0.0;
        let (mut a, mut b) = (0usize, 0usize);
        while a < self.entries.len() && b < other.entries.len() {
            match self.entries[a].0.cmp(&other.entries[b].0) {
                core::cmp::Ordering::Less => a += 1,
                core::cmp::Ordering::Greater => b += 1,
                core::cmp::Ordering::Equal => {
                    sum += self.entries[a].1 * other.entries[b].1;
                    a += 1;
                    b += 1;
                }
            }
        }
        sum
    }
}

/// TF-IDF weights for one user's tokens: `tf * ln(n_docs / df)`.
/// Tokens outside the vocabulary are ignored; the result may be all-zero.
pub fn build_publication_vector(
    tokens: &[String],
    corpus: &Corpus,
) -> Result<SparseVector, SimilarityError> {
    if corpus.n_keywords() == 0 {
        return Err(SimilarityError::EmptyVocabulary);
    }
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    for token in tokens {
        if let Some(&idx) = corpus.index.get(token) {
            *counts.entry(idx).or_insert(0) += 1;
        }
    }
    let entries = counts
        .into_iter()
        .map(|(idx, tf)| {
            let idf = (corpus.n_docs as f64 / corpus.doc_freq[idx as usize] as f64).ln();
            (idx, tf as f64 * idf)
        })
        .collect();
    Ok(SparseVector::new(corpus.n_keywords(), entries))
}

/// Cosine similarity; returns 0 when either vector has zero norm.
pub fn publication_similarity(
    a: &SparseVector,
    b: &SparseVector,
) -> Result<f64, SimilarityError> {
    if a.dim() != b.dim() {
        return Err(SimilarityError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(a.dot(b) / denom)
}

/// Channel weights; every group is normalized to sum to one at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityWeights {
    pub lambda_p: f64,
    pub lambda_c: f64,
    pub lambda_i: f64,
    pub lambda_r: f64,
    pub lambda_f: f64,
    pub lambda_lk: f64,
    pub lambda_cmt: f64,
    pub lambda_rp: f64,
}

impl SimilarityWeights {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p: f64,
        c: f64,
        i: f64,
        r: f64,
        f: f64,
        lk: f64,
        cmt: f64,
        rp: f64,
    ) -> Result<Self, SimilarityError> {
        let normalize = |group: &mut [&mut f64], name: &'static str| {
            let mut sum = 0.0;
            for value in group.iter() {
                if !(value.is_finite() && **value >= 0.0) {
                    return Err(SimilarityError::BadWeight);
                }
                sum += **value;
            }
            if sum <= 0.0 {
                return Err(SimilarityError::ZeroWeightGroup(name));
            }
            for value in group.iter_mut() {
                **value /= sum;
            }
            Ok(())
        };
        let (mut p, mut c, mut i) = (p, c, i);
        let (mut r, mut f) = (r, f);
        let (mut lk, mut cmt, mut rp) = (lk, cmt, rp);
        normalize(&mut [&mut p, &mut c, &mut i], "channel")?;
        normalize(&mut [&mut r, &mut f], "connection")?;
        normalize(&mut [&mut lk, &mut cmt, &mut rp], "interaction")?;
        Ok(Self {
            lambda_p: p,
            lambda_c: c,
            lambda_i: i,
            lambda_r: r,
            lambda_f: f,
            lambda_lk: lk,
            lambda_cmt: cmt,
            lambda_rp: rp,
        })
    }

    /// Uniform weights in every group.
    pub fn uniform() -> Self {
        Self::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap()
    }
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        Self::uniform()
    }
}

/// One user's social profile. Interaction rows keep the user's own total in
/// their diagonal slot and co-counts elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: u32,
    pub publication: SparseVector,
    pub follow_row: Vec<bool>,
    pub friend_row: Vec<bool>,
    pub like_row: Vec<u32>,
    pub comment_row: Vec<u32>,
    pub repost_row: Vec<u32>,
}

impl UserProfile {
    fn n_users(&self) -> usize {
        self.follow_row.len()
    }
}

fn binary_cosine(a: &[bool], b: &[bool]) -> f64 {
    let dot = a.iter().zip(b).filter(|&(&x, &y)| x && y).count() as f64;
    let na = a.iter().filter(|&&x| x).count() as f64;
    let nb = b.iter().filter(|&&x| x).count() as f64;
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

fn check_same_network(a: &UserProfile, b: &UserProfile) -> Result<(), SimilarityError> {
    if a.n_users() != b.n_users() {
        return Err(SimilarityError::UserCountMismatch {
            left: a.n_users(),
            right: b.n_users(),
        });
    }
    Ok(())
}

/// Follow/close-friend channel: weighted sum of two binary cosines.
pub fn connection_similarity(
    a: &UserProfile,
    b: &UserProfile,
    weights: &SimilarityWeights,
) -> Result<f64, SimilarityError> {
    check_same_network(a, b)?;
    Ok(weights.lambda_r * binary_cosine(&a.follow_row, &b.follow_row)
        + weights.lambda_f * binary_cosine(&a.friend_row, &b.friend_row))
}

/// Interaction channel: co-counts divided by the first user's own totals;
/// a term with zero denominator contributes 0.
pub fn interaction_similarity(
    a: &UserProfile,
    b: &UserProfile,
    weights: &SimilarityWeights,
) -> Result<f64, SimilarityError> {
    check_same_network(a, b)?;
    let term = |row_a: &[u32], lambda: f64| -> f64 {
        let own = row_a[a.user_id as usize];
        if own == 0 {
            return 0.0;
        }
        lambda * row_a[b.user_id as usize] as f64 / own as f64
    };
    Ok(term(&a.like_row, weights.lambda_lk)
        + term(&a.comment_row, weights.lambda_cmt)
        + term(&a.repost_row, weights.lambda_rp))
}

/// The unified similarity: weighted sum of the three channels.
pub fn unified_similarity(
    a: &UserProfile,
    b: &UserProfile,
    weights: &SimilarityWeights,
) -> Result<f64, SimilarityError> {
    let sim_p = publication_similarity(&a.publication, &b.publication)?;
    let sim_c = connection_similarity(a, b, weights)?;
    let sim_i = interaction_similarity(a, b, weights)?;
    Ok(weights.lambda_p * sim_p + weights.lambda_c * sim_c + weights.lambda_i * sim_i)
}

/// Similarity of the target to every other user, ordered by user id.
pub fn similarity_table(
    target: u32,
    profiles: &[UserProfile],
    weights: &SimilarityWeights,
) -> Result<Vec<(u32, f64)>, SimilarityError> {
    let target_profile = profiles
        .iter()
        .find(|p| p.user_id == target)
        .ok_or(SimilarityError::UnknownUser(target))?;
    let mut table = Vec::with_capacity(profiles.len().saturating_sub(1));
    for other in profiles {
        if other.user_id == target {
            continue;
        }
        table.push((
            other.user_id,
            unified_similarity(target_profile, other, weights)?,
        ));
    }
    table.sort_unstable_by_key(|&(id, _)| id);
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sentiment {
    Positive,
    NonPositive,
}

/// Classifier gate for comment and repost counting. The bundled classifier
/// counts lexicon hits; anything smarter can be swapped in behind this trait.
pub trait SentimentClassifier {
    fn classify(&self, tokens: &[String]) -> Sentiment;
}

#[derive(Debug, Clone)]
pub struct LexiconClassifier {
    positive: BTreeSet<String>,
    negative: BTreeSet<String>,
}

impl LexiconClassifier {
    pub fn new(
        positive: impl IntoIterator<Item = String>,
        negative: impl IntoIterator<Item = String>,
    ) -> Result<Self, SimilarityError> {
        let positive: BTreeSet<String> = positive.into_iter().collect();
        let negative: BTreeSet<String> = negative.into_iter().collect();
        if positive.is_empty() && negative.is_empty() {
            return Err(SimilarityError::EmptyLexicon);
        }
        Ok(Self { positive, negative })
    }

    /// Small built-in English lexicon.
    pub fn bundled() -> Self {
        let positive = [
            "amazing", "awesome", "best", "brilliant", "cool", "enjoy",
            "excellent", "fantastic", "good", "great", "happy", "like",
            "love", "nice", "perfect", "wonderful",
        ];
        let negative = [
            "angry", "awful", "bad", "boring", "disappointing", "dislike",
            "hate", "horrible", "poor", "sad", "terrible", "worst",
        ];
        Self {
            positive: positive.iter().map(|&s| String::from(s)).collect(),
            negative: negative.iter().map(|&s| String::from(s)).collect(),
        }
    }
}

impl SentimentClassifier for LexiconClassifier {
    /// Positive iff strictly more positive than negative lexicon hits.
    fn classify(&self, tokens: &[String]) -> Sentiment {
        let pos = tokens.iter().filter(|t| self.positive.contains(*t)).count();
        let neg = tokens.iter().filter(|t| self.negative.contains(*t)).count();
        if pos > neg {
            Sentiment::Positive
        } else {
            Sentiment::NonPositive
        }
    }
}

/// Raw social activity for a set of users, the input to profile building.
/// Publications are raw post texts; comment and repost events carry their
/// text so the sentiment gate can filter them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SocialLog {
    pub n_users: usize,
    pub publications: Vec<Vec<String>>,
    pub follows: Vec<(u32, u32)>,
    pub likes: Vec<(u32, u64)>,
    pub comments: Vec<InteractionEvent>,
    pub reposts: Vec<InteractionEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionEvent {
    pub user: u32,
    pub article: u64,
    pub text: String,
}

impl SocialLog {
    pub fn new(n_users: usize) -> Self {
        Self {
            n_users,
            publications: vec![Vec::new(); n_users],
            follows: Vec::new(),
            likes: Vec::new(),
            comments: Vec::new(),
            reposts: Vec::new(),
        }
    }
}

fn article_sets(
    n_users: usize,
    events: impl Iterator<Item = (u32, u64)>,
) -> Result<Vec<BTreeSet<u64>>, SimilarityError> {
    let mut sets = vec![BTreeSet::new(); n_users];
    for (user, article) in events {
        if user as usize >= n_users {
            return Err(SimilarityError::UserOutOfRange { user, n_users });
        }
        sets[user as usize].insert(article);
    }
    Ok(sets)
}

fn interaction_rows(sets: &[BTreeSet<u64>]) -> Vec<Vec<u32>> {
    let n = sets.len();
    let mut rows = vec![vec![0u32; n]; n];
    for i in 0..n {
        rows[i][i] = sets[i].len() as u32;
        for j in 0..n {
            if i != j {
                rows[i][j] = sets[i].intersection(&sets[j]).count() as u32;
            }
        }
    }
    rows
}

/// Build all user profiles from a social log. Comment and repost events are
/// counted only when the classifier marks their text positive; co-counts are
/// over distinct articles. Self-follows are dropped.
pub fn build_profiles(
    log: &SocialLog,
    classifier: &dyn SentimentClassifier,
    min_df: usize,
) -> Result<(Vec<UserProfile>, Corpus), SimilarityError> {
    let n = log.n_users;
    let token_lists: Vec<Vec<String>> = log
        .publications
        .iter()
        .map(|posts| posts.iter().flat_map(|p| tokenize(p)).collect())
        .collect();
    let corpus = Corpus::build(&token_lists, min_df);

    let mut follow = vec![vec![false; n]; n];
    for &(from, to) in &log.follows {
        if from as usize >= n {
            return Err(SimilarityError::UserOutOfRange { user: from, n_users: n });
        }
        if to as usize >= n {
            return Err(SimilarityError::UserOutOfRange { user: to, n_users: n });
        }
        if from != to {
            follow[from as usize][to as usize] = true;
        }
    }

    let positive_only = |events: &[InteractionEvent]| {
        events
            .iter()
            .filter(|e| classifier.classify(&tokenize(&e.text)) == Sentiment::Positive)
            .map(|e| (e.user, e.article))
            .collect::<Vec<_>>()
    };
    let like_sets = article_sets(n, log.likes.iter().copied())?;
    let comment_sets = article_sets(n, positive_only(&log.comments).into_iter())?;
    let repost_sets = article_sets(n, positive_only(&log.reposts).into_iter())?;
    let like_rows = interaction_rows(&like_sets);
    let comment_rows = interaction_rows(&comment_sets);
    let repost_rows = interaction_rows(&repost_sets);

    let mut profiles = Vec::with_capacity(n);
    for i in 0..n {
        let publication = if corpus.n_keywords() == 0 {
            SparseVector::zero(0)
        } else {
            build_publication_vector(&token_lists[i], &corpus)?
        };
        let friend_row = (0..n).map(|j| follow[i][j] && follow[j][i]).collect();
        profiles.push(UserProfile {
            user_id: i as u32,
            publication,
            follow_row: follow[i].clone(),
            friend_row,
            like_row: like_rows[i].clone(),
            comment_row: comment_rows[i].clone(),
            repost_row: repost_rows[i].clone(),
        });
    }
    Ok((profiles, corpus))
}
