//! Dataset assembly: seeded synthetic data or HetRec-style TSV directories.
//!
//! TSV conventions: UTF-8, tab-separated, LF or CRLF endings, an optional
//! single header line (detected when the first field of the first line is
//! not an integer). Every data row must carry the same column count as the
//! first data row, and at least the schema's minimum.
//!
//! View construction per dataset kind (the upstream archives only ship raw
//! event tables, so the item views are defined here):
//!
//! * `lastfm`: items are artists; view 0 = artist x tag counts, view 1 =
//!   artist x user listening weights. Ratings bucket each user's listening
//!   weights into quintiles 1..=5. Publications are the user's tag texts;
//!   tagging an artist also counts as a "like" of that artist.
//! * `delicious`: items are bookmarks; view 0 = bookmark x tag counts,
//!   view 1 = bookmark x user tagging counts. The rating is the number of
//!   distinct tags the user put on the bookmark, capped at 5.
//! * `movielens-hetrec`: items are movies; view 0 = movie x genre
//!   indicators, view 1 = movie x tag weights. Ratings are rounded to
//!   1..=5. The archive carries no social graph, so profiles are empty.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ndarray::Array2;
use ppsr_core::nmf::ViewMatrix;
use ppsr_core::protocol::RankMatrix;
use ppsr_core::similarity::{build_profiles, Corpus, LexiconClassifier, SocialLog, UserProfile};
use ppsr_core::synth::generate_synthetic;

use crate::config::AppConfig;
use crate::error::{CliError, DataError};

#[derive(Debug, Clone)]
pub struct Dataset {
    pub views: Vec<ViewMatrix>,
    pub ratings: RankMatrix,
    pub social: SocialLog,
    pub profiles: Vec<UserProfile>,
    pub corpus: Corpus,
    /// Planted item clusters (synthetic data only).
    pub truth: Option<Vec<usize>>,
    /// Planted user groups (synthetic data only).
    pub user_groups: Option<Vec<usize>>,
    pub item_labels: Vec<String>,
    pub user_labels: Vec<String>,
    pub warnings: Vec<String>,
}

/// Load the dataset named by the config; `seed_override` reseeds synthetic
/// generation (experiment runs generate one dataset per seed).
pub fn load_dataset(config: &AppConfig, seed_override: Option<u64>) -> Result<Dataset, CliError> {
    match config.dataset.kind.as_str() {
        "synthetic" => {
            let spec = config.dataset.synthetic.to_spec(seed_override)?;
            let data = generate_synthetic(&spec)?;
            Ok(Dataset {
                item_labels: (0..spec.n_items).map(|i| format!("item{i}")).collect(),
                user_labels: (0..spec.n_users).map(|u| format!("user{u}")).collect(),
                views: data.views,
                ratings: data.ratings,
                social: data.social_log,
                profiles: data.profiles,
                corpus: data.corpus,
                truth: Some(data.planted_assignment),
                user_groups: Some(data.user_groups),
                warnings: Vec::new(),
            })
        }
        kind => {
            let dir = config
                .dataset
                .path
                .as_ref()
                .ok_or_else(|| CliError::Config("dataset.path is required".into()))?;
            let tables = match kind {
                "lastfm" => load_lastfm(dir)?,
                "delicious" => load_delicious(dir)?,
                "movielens-hetrec" => load_movielens(dir)?,
                other => return Err(CliError::Config(format!("unknown dataset kind {other:?}"))),
            };
            let classifier = LexiconClassifier::bundled();
            let (profiles, corpus) =
                build_profiles(&tables.social, &classifier, config.similarity.min_df)
                    .map_err(CliError::data)?;
            let views = tables
                .views
                .into_iter()
                .enumerate()
                .map(|(id, (name, data))| {
                    ViewMatrix::new(data, id)
                        .map_err(|e| CliError::Data(format!("view {name}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let ratings = RankMatrix::new(tables.ratings, RankMatrix::DEFAULT_RANK_MAX)
                .map_err(CliError::data)?;
            Ok(Dataset {
                views,
                ratings,
                social: tables.social,
                profiles,
                corpus,
                truth: None,
                user_groups: None,
                item_labels: tables.item_labels,
                user_labels: tables.user_labels,
                warnings: tables.warnings,
            })
        }
    }
}

struct LoadedTables {
    views: Vec<(String, Array2<f64>)>,
    ratings: Array2<u32>,
    social: SocialLog,
    item_labels: Vec<String>,
    user_labels: Vec<String>,
    warnings: Vec<String>,
}

/// Rows with their 1-based line numbers, header skipped.
fn read_rows(path: &Path, min_cols: usize) -> Result<Vec<(usize, Vec<String>)>, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file = path.display().to_string();
    let mut rows = Vec::new();
    let mut expected_cols: Option<usize> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(|f| f.trim().to_string()).collect();
        // A leading header line is allowed when its first field is not an
        // integer.
        if rows.is_empty()
            && expected_cols.is_none()
            && fields[0].parse::<i64>().is_err()
        {
            expected_cols = Some(fields.len());
            continue;
        }
        if let Some(cols) = expected_cols {
            if fields.len() != cols {
                return Err(DataError::Malformed {
                    file,
                    line: idx + 1,
                    message: format!("expected {cols} columns, found {}", fields.len()),
                });
            }
        } else {
            expected_cols = Some(fields.len());
        }
        if fields.len() < min_cols {
            return Err(DataError::Malformed {
                file,
                line: idx + 1,
                message: format!("expected at least {min_cols} columns, found {}", fields.len()),
            });
        }
        rows.push((idx + 1, fields));
    }
    Ok(rows)
}

fn parse_id(field: &str, file: &Path, line: usize, what: &str) -> Result<u32, DataError> {
    field.parse::<u32>().map_err(|_| DataError::Malformed {
        file: file.display().to_string(),
        line,
        message: format!("{what} {field:?} is not a non-negative integer"),
    })
}

fn parse_float(field: &str, file: &Path, line: usize, what: &str) -> Result<f64, DataError> {
    let value: f64 = field.parse().map_err(|_| DataError::Malformed {
        file: file.display().to_string(),
        line,
        message: format!("{what} {field:?} is not a number"),
    })?;
    if !value.is_finite() || value < 0.0 {
        return Err(DataError::Malformed {
            file: file.display().to_string(),
            line,
            message: format!("{what} {field:?} must be a non-negative finite number"),
        });
    }
    Ok(value)
}

/// Dense index over raw ids, ordered by raw id.
struct IdIndex {
    map: BTreeMap<u32, u32>,
}

impl IdIndex {
    fn from_set(ids: BTreeSet<u32>) -> Self {
        let map = ids
            .into_iter()
            .enumerate()
            .map(|(idx, raw)| (raw, idx as u32))
            .collect();
        Self { map }
    }

    fn get(&self, raw: u32) -> u32 {
        self.map[&raw]
    }

    fn len(&self) -> usize {
        self.map.len()
    }

    fn labels(&self, prefix: &str) -> Vec<String> {
        self.map.keys().map(|raw| format!("{prefix}{raw}")).collect()
    }
}

fn collapse_duplicate_edges(
    edges: Vec<(u32, u32)>,
    what: &str,
    warnings: &mut Vec<String>,
) -> Vec<(u32, u32)> {
    let mut seen = BTreeSet::new();
    let mut duplicates = 0usize;
    let mut out = Vec::with_capacity(edges.len());
    for edge in edges {
        if seen.insert(edge) {
            out.push(edge);
        } else {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        warnings.push(format!("collapsed {duplicates} duplicate {what} edges"));
    }
    out
}

/// Quintile bucketing of one user's listening weights into ratings 1..=5.
fn bucket_ratings(weights: &[(u32, f64)]) -> Vec<(u32, u32)> {
    let mut ordered: Vec<(u32, f64)> = weights.to_vec();
    ordered.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let count = ordered.len();
    ordered
        .into_iter()
        .enumerate()
        .map(|(pos, (item, _))| (item, 1 + (pos * 5 / count).min(4) as u32))
        .collect()
}

fn load_lastfm(dir: &Path) -> Result<LoadedTables, DataError> {
    let artists_path = dir.join("user_artists.dat");
    let friends_path = dir.join("user_friends.dat");
    let tagged_path = dir.join("user_taggedartists.dat");
    let tags_path = dir.join("tags.dat");

    let listen_rows = read_rows(&artists_path, 3)?;
    let friend_rows = read_rows(&friends_path, 2)?;
    let tagged_rows = read_rows(&tagged_path, 3)?;
    let tag_rows = read_rows(&tags_path, 2)?;

    let mut tag_names: BTreeMap<u32, String> = BTreeMap::new();
    for (line, fields) in &tag_rows {
        let id = parse_id(&fields[0], &tags_path, *line, "tag id")?;
        tag_names.insert(id, fields[1].clone());
    }

    let mut users = BTreeSet::new();
    let mut items = BTreeSet::new();
    let mut listens = Vec::new();
    for (line, fields) in &listen_rows {
        let user = parse_id(&fields[0], &artists_path, *line, "user id")?;
        let artist = parse_id(&fields[1], &artists_path, *line, "artist id")?;
        let weight = parse_float(&fields[2], &artists_path, *line, "listening weight")?;
        users.insert(user);
        items.insert(artist);
        listens.push((user, artist, weight));
    }
    let mut follows_raw = Vec::new();
    for (line, fields) in &friend_rows {
        let user = parse_id(&fields[0], &friends_path, *line, "user id")?;
        let friend = parse_id(&fields[1], &friends_path, *line, "friend id")?;
        users.insert(user);
        users.insert(friend);
        follows_raw.push((user, friend));
    }
    let mut tag_events = Vec::new();
    for (line, fields) in &tagged_rows {
        let user = parse_id(&fields[0], &tagged_path, *line, "user id")?;
        let artist = parse_id(&fields[1], &tagged_path, *line, "artist id")?;
        let tag = parse_id(&fields[2], &tagged_path, *line, "tag id")?;
        users.insert(user);
        items.insert(artist);
        tag_events.push((user, artist, tag));
    }

    let used_tags: BTreeSet<u32> = tag_events.iter().map(|&(_, _, t)| t).collect();
    if used_tags.is_empty() {
        return Err(DataError::Invalid(format!(
            "{}: no tag assignments; the tag view would have zero columns",
            tagged_path.display()
        )));
    }
    let users = IdIndex::from_set(users);
    let items = IdIndex::from_set(items);
    let tags = IdIndex::from_set(used_tags);

    let mut warnings = Vec::new();
    let mut tag_view = Array2::<f64>::zeros((items.len(), tags.len()));
    let mut listen_view = Array2::<f64>::zeros((items.len(), users.len()));
    let mut publications: Vec<Vec<String>> = vec![Vec::new(); users.len()];
    let mut likes = Vec::new();
    for &(user, artist, tag) in &tag_events {
        let item = items.get(artist) as usize;
        tag_view[(item, tags.get(tag) as usize)] += 1.0;
        let label = tag_names
            .get(&tag)
            .cloned()
            .unwrap_or_else(|| format!("tag{tag}"));
        publications[users.get(user) as usize].push(label);
        likes.push((users.get(user), artist as u64));
    }
    let likes: Vec<(u32, u64)> = {
        let unique: BTreeSet<(u32, u64)> = likes.into_iter().collect();
        unique.into_iter().collect()
    };

    let mut per_user_weights: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
    for &(user, artist, weight) in &listens {
        let item = items.get(artist);
        listen_view[(item as usize, users.get(user) as usize)] += weight;
        per_user_weights
            .entry(users.get(user))
            .or_default()
            .push((item, weight));
    }
    let mut ratings = Array2::<u32>::zeros((users.len(), items.len()));
    for (user, weights) in &per_user_weights {
        for (item, rating) in bucket_ratings(weights) {
            ratings[(*user as usize, item as usize)] = rating;
        }
    }

    let follows_raw: Vec<(u32, u32)> = follows_raw
        .into_iter()
        .map(|(a, b)| (users.get(a), users.get(b)))
        .collect();
    let follows = collapse_duplicate_edges(follows_raw, "friend", &mut warnings);

    let mut social = SocialLog::new(users.len());
    social.publications = publications
        .into_iter()
        .map(|tags| if tags.is_empty() { Vec::new() } else { vec![tags.join(" ")] })
        .collect();
    social.follows = follows;
    social.likes = likes;

    Ok(LoadedTables {
        views: vec![
            ("artist-tags".into(), tag_view),
            ("artist-listeners".into(), listen_view),
        ],
        ratings,
        social,
        item_labels: items.labels("artist"),
        user_labels: users.labels("user"),
        warnings,
    })
}

fn load_delicious(dir: &Path) -> Result<LoadedTables, DataError> {
    let tagged_path = dir.join("user_taggedbookmarks.dat");
    let contacts_path = dir.join("user_contacts.dat");
    let tags_path = dir.join("tags.dat");

    let tagged_rows = read_rows(&tagged_path, 3)?;
    let contact_rows = read_rows(&contacts_path, 2)?;
    let tag_rows = read_rows(&tags_path, 2)?;

    let mut tag_names: BTreeMap<u32, String> = BTreeMap::new();
    for (line, fields) in &tag_rows {
        let id = parse_id(&fields[0], &tags_path, *line, "tag id")?;
        tag_names.insert(id, fields[1].clone());
    }

    let mut users = BTreeSet::new();
    let mut items = BTreeSet::new();
    let mut events = Vec::new();
    for (line, fields) in &tagged_rows {
        let user = parse_id(&fields[0], &tagged_path, *line, "user id")?;
        let bookmark = parse_id(&fields[1], &tagged_path, *line, "bookmark id")?;
        let tag = parse_id(&fields[2], &tagged_path, *line, "tag id")?;
        users.insert(user);
        items.insert(bookmark);
        events.push((user, bookmark, tag));
    }
    let mut follows_raw = Vec::new();
    for (line, fields) in &contact_rows {
        let user = parse_id(&fields[0], &contacts_path, *line, "user id")?;
        let contact = parse_id(&fields[1], &contacts_path, *line, "contact id")?;
        users.insert(user);
        users.insert(contact);
        follows_raw.push((user, contact));
    }

    let used_tags: BTreeSet<u32> = events.iter().map(|&(_, _, t)| t).collect();
    if used_tags.is_empty() {
        return Err(DataError::Invalid(format!(
            "{}: no tag assignments; the tag view would have zero columns",
            tagged_path.display()
        )));
    }
    let users = IdIndex::from_set(users);
    let items = IdIndex::from_set(items);
    let tags = IdIndex::from_set(used_tags);

    let mut warnings = Vec::new();
    let mut tag_view = Array2::<f64>::zeros((items.len(), tags.len()));
    let mut user_view = Array2::<f64>::zeros((items.len(), users.len()));
    let mut publications: Vec<Vec<String>> = vec![Vec::new(); users.len()];
    let mut likes = BTreeSet::new();
    let mut tags_per_pair: BTreeMap<(u32, u32), BTreeSet<u32>> = BTreeMap::new();
    for &(user, bookmark, tag) in &events {
        let item = items.get(bookmark);
        let user_idx = users.get(user);
        tag_view[(item as usize, tags.get(tag) as usize)] += 1.0;
        user_view[(item as usize, user_idx as usize)] += 1.0;
        let label = tag_names
            .get(&tag)
            .cloned()
            .unwrap_or_else(|| format!("tag{tag}"));
        publications[user_idx as usize].push(label);
        likes.insert((user_idx, bookmark as u64));
        tags_per_pair.entry((user_idx, item)).or_default().insert(tag);
    }
    let mut ratings = Array2::<u32>::zeros((users.len(), items.len()));
    for ((user, item), tag_set) in &tags_per_pair {
        ratings[(*user as usize, *item as usize)] = (tag_set.len() as u32).min(5);
    }

    let follows_raw: Vec<(u32, u32)> = follows_raw
        .into_iter()
        .map(|(a, b)| (users.get(a), users.get(b)))
        .collect();
    let follows = collapse_duplicate_edges(follows_raw, "contact", &mut warnings);

    let mut social = SocialLog::new(users.len());
    social.publications = publications
        .into_iter()
        .map(|tags| if tags.is_empty() { Vec::new() } else { vec![tags.join(" ")] })
        .collect();
    social.follows = follows;
    social.likes = likes.into_iter().collect();

    Ok(LoadedTables {
        views: vec![
            ("bookmark-tags".into(), tag_view),
            ("bookmark-users".into(), user_view),
        ],
        ratings,
        social,
        item_labels: items.labels("bookmark"),
        user_labels: users.labels("user"),
        warnings,
    })
}

fn load_movielens(dir: &Path) -> Result<LoadedTables, DataError> {
    let rated_path = dir.join("user_ratedmovies.dat");
    let genres_path = dir.join("movie_genres.dat");
    let tags_path = dir.join("movie_tags.dat");

    let rated_rows = read_rows(&rated_path, 3)?;
    let genre_rows = read_rows(&genres_path, 2)?;
    let tag_rows = read_rows(&tags_path, 3)?;

    let mut users = BTreeSet::new();
    let mut items = BTreeSet::new();
    let mut rated = Vec::new();
    for (line, fields) in &rated_rows {
        let user = parse_id(&fields[0], &rated_path, *line, "user id")?;
        let movie = parse_id(&fields[1], &rated_path, *line, "movie id")?;
        let score = parse_float(&fields[2], &rated_path, *line, "rating")?;
        users.insert(user);
        items.insert(movie);
        rated.push((user, movie, score));
    }
    let mut genres = BTreeSet::new();
    let mut genre_events = Vec::new();
    for (line, fields) in &genre_rows {
        let movie = parse_id(&fields[0], &genres_path, *line, "movie id")?;
        items.insert(movie);
        genres.insert(fields[1].clone());
        genre_events.push((movie, fields[1].clone()));
    }
    let mut tag_ids = BTreeSet::new();
    let mut tag_events = Vec::new();
    for (line, fields) in &tag_rows {
        let movie = parse_id(&fields[0], &tags_path, *line, "movie id")?;
        let tag = parse_id(&fields[1], &tags_path, *line, "tag id")?;
        let weight = parse_float(&fields[2], &tags_path, *line, "tag weight")?;
        items.insert(movie);
        tag_ids.insert(tag);
        tag_events.push((movie, tag, weight));
    }
    if genres.is_empty() {
        return Err(DataError::Invalid(format!(
            "{}: no genre assignments; the genre view would have zero columns",
            genres_path.display()
        )));
    }
    if tag_ids.is_empty() {
        return Err(DataError::Invalid(format!(
            "{}: no tag assignments; the tag view would have zero columns",
            tags_path.display()
        )));
    }

    let users = IdIndex::from_set(users);
    let items = IdIndex::from_set(items);
    let tags = IdIndex::from_set(tag_ids);
    let genre_index: BTreeMap<String, usize> = genres
        .into_iter()
        .enumerate()
        .map(|(idx, g)| (g, idx))
        .collect();

    let mut genre_view = Array2::<f64>::zeros((items.len(), genre_index.len()));
    for (movie, genre) in &genre_events {
        genre_view[(items.get(*movie) as usize, genre_index[genre])] = 1.0;
    }
    let mut tag_view = Array2::<f64>::zeros((items.len(), tags.len()));
    for &(movie, tag, weight) in &tag_events {
        tag_view[(items.get(movie) as usize, tags.get(tag) as usize)] += weight;
    }
    let mut ratings = Array2::<u32>::zeros((users.len(), items.len()));
    for &(user, movie, score) in &rated {
        let rounded = (score.round() as u32).clamp(1, 5);
        ratings[(users.get(user) as usize, items.get(movie) as usize)] = rounded;
    }

    // The GroupLens HetRec archive has no social graph; profiles stay empty.
    let social = SocialLog::new(users.len());

    Ok(LoadedTables {
        views: vec![
            ("movie-genres".into(), genre_view),
            ("movie-tags".into(), tag_view),
        ],
        ratings,
        social,
        item_labels: items.labels("movie"),
        user_labels: users.labels("user"),
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AppConfig;
    use std::fs;
    use tempfile::TempDir;

    fn write(dir: &TempDir, name: &str, content: &str) {
        fs::write(dir.path().join(name), content).unwrap();
    }

    fn lastfm_fixture() -> TempDir {
        let dir = TempDir::new().unwrap();
        write(
            &dir,
            "user_artists.dat",
            "userID\tartistID\tweight\n1\t10\t100\n1\t11\t50\n2\t10\t70\n3\t12\t5\n",
        );
        write(
            &dir,
            "user_friends.dat",
            "userID\tfriendID\n1\t2\n2\t1\n1\t3\n",
        );
        write(
            &dir,
            "user_taggedartists.dat",
            "userID\tartistID\ttagID\tday\tmonth\tyear\n1\t10\t7\t1\t4\t2009\n2\t10\t7\t2\t4\t2009\n3\t12\t8\t3\t4\t2009\n",
        );
        write(&dir, "tags.dat", "tagID\ttagValue\n7\tjazz\n8\tmetal\n");
        dir
    }

    fn config_for(dir: &TempDir, kind: &str) -> AppConfig {
        let text = format!(
            "[dataset]\nkind = \"{kind}\"\npath = '{}'\n",
            dir.path().display()
        );
        let config: AppConfig = toml::from_str(&text).unwrap();
        config.validate().unwrap();
        config
    }

    #[test]
    fn lastfm_fixture_loads_with_expected_shapes() {
        let dir = lastfm_fixture();
        let config = config_for(&dir, "lastfm");
        let data = load_dataset(&config, None).unwrap();
        // Users {1,2,3} -> 3; artists {10,11,12} -> 3; tags {7,8} -> 2.
        assert_eq!(data.user_labels, vec!["user1", "user2", "user3"]);
        assert_eq!(data.item_labels, vec!["artist10", "artist11", "artist12"]);
        assert_eq!(data.views.len(), 2);
        assert_eq!(data.views[0].data().dim(), (3, 2));
        assert_eq!(data.views[1].data().dim(), (3, 3));
        assert_eq!(data.ratings.n_users(), 3);
        assert_eq!(data.ratings.n_items(), 3);
        // Each user's listened items bucket into 1..=5.
        assert!(data.ratings.get(0, 0) >= 1 && data.ratings.get(0, 0) <= 5);
        // user3 listened only to artist12.
        assert_eq!(data.ratings.get(2, 2), 1);
        assert_eq!(data.ratings.get(2, 0), 0);
    }

    #[test]
    fn friend_fixture_builds_follow_and_friend_rows() {
        // Edges: 1<->2 mutual, 1->3 one-way.
        let dir = lastfm_fixture();
        let config = config_for(&dir, "lastfm");
        let data = load_dataset(&config, None).unwrap();
        let p = &data.profiles;
        assert!(p[0].follow_row[1] && p[1].follow_row[0]);
        assert!(p[0].follow_row[2]);
        assert!(!p[2].follow_row[0]);
        assert!(p[0].friend_row[1]);
        assert!(!p[0].friend_row[2]);
    }

    #[test]
    fn loading_is_deterministic() {
        let dir = lastfm_fixture();
        let config = config_for(&dir, "lastfm");
        let a = load_dataset(&config, None).unwrap();
        let b = load_dataset(&config, None).unwrap();
        assert_eq!(a.views[0].data(), b.views[0].data());
        assert_eq!(a.ratings.data(), b.ratings.data());
        assert_eq!(a.social, b.social);
    }

    #[test]
    fn empty_tag_assignments_are_rejected() {
        let dir = lastfm_fixture();
        write(&dir, "user_taggedartists.dat", "userID\tartistID\ttagID\tday\tmonth\tyear\n");
        let config = config_for(&dir, "lastfm");
        let err = load_dataset(&config, None).unwrap_err();
        assert!(err.to_string().contains("zero columns"), "{err}");
    }

    #[test]
    fn non_integer_id_reports_the_line() {
        let dir = lastfm_fixture();
        write(
            &dir,
            "user_friends.dat",
            "userID\tfriendID\n1\t2\nbogus\t3\n",
        );
        let config = config_for(&dir, "lastfm");
        let err = load_dataset(&config, None).unwrap_err();
        let message = err.to_string();
        assert!(message.contains(":3:"), "{message}");
        assert!(message.contains("bogus"), "{message}");
    }

    #[test]
    fn duplicate_edges_collapse_with_a_warning() {
        let dir = lastfm_fixture();
        write(
            &dir,
            "user_friends.dat",
            "userID\tfriendID\n1\t2\n1\t2\n2\t1\n",
        );
        let config = config_for(&dir, "lastfm");
        let data = load_dataset(&config, None).unwrap();
        assert_eq!(data.social.follows.len(), 2);
        assert!(data
            .warnings
            .iter()
            .any(|w| w.contains("duplicate") && w.contains("friend")));
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = TempDir::new().unwrap();
        let config = config_for(&dir, "lastfm");
        let err = load_dataset(&config, None).unwrap_err();
        assert!(err.to_string().contains("missing file"), "{err}");
    }

    #[test]
    fn inconsistent_column_counts_are_rejected() {
        let dir = lastfm_fixture();
        write(
            &dir,
            "user_artists.dat",
            "userID\tartistID\tweight\n1\t10\t100\n1\t11\n",
        );
        let config = config_for(&dir, "lastfm");
        let err = load_dataset(&config, None).unwrap_err();
        assert!(err.to_string().contains("columns"), "{err}");
    }

    #[test]
    fn delicious_fixture_loads() {
        let dir = TempDir::new().unwrap();
        write(
            &dir,
            "user_taggedbookmarks.dat",
            "userID\tbookmarkID\ttagID\tday\tmonth\tyear\n1\t100\t5\t1\t1\t2010\n1\t100\t6\t1\t1\t2010\n2\t101\t5\t1\t1\t2010\n",
        );
        write(&dir, "user_contacts.dat", "userID\tcontactID\n1\t2\n");
        write(&dir, "tags.dat", "tagID\ttagValue\n5\tdesign\n6\tart\n");
        let config = config_for(&dir, "delicious");
        let data = load_dataset(&config, None).unwrap();
        assert_eq!(data.views[0].data().dim(), (2, 2));
        assert_eq!(data.views[1].data().dim(), (2, 2));
        // Two distinct tags on bookmark 100 by user 1.
        assert_eq!(data.ratings.get(0, 0), 2);
        assert_eq!(data.ratings.get(1, 1), 1);
        assert!(data.profiles[0].follow_row[1]);
    }

    #[test]
    fn movielens_fixture_loads_without_social_graph() {
        let dir = TempDir::new().unwrap();
        write(
            &dir,
            "user_ratedmovies.dat",
            "userID\tmovieID\trating\tday\tmonth\tyear\n1\t3\t4.5\t1\t1\t2008\n2\t3\t0.5\t1\t1\t2008\n2\t4\t3.0\t1\t1\t2008\n",
        );
        write(&dir, "movie_genres.dat", "movieID\tgenre\n3\tDrama\n4\tComedy\n4\tDrama\n");
        write(&dir, "movie_tags.dat", "movieID\ttagID\ttagWeight\n3\t9\t2\n4\t9\t1\n");
        let config = config_for(&dir, "movielens-hetrec");
        let data = load_dataset(&config, None).unwrap();
        assert_eq!(data.ratings.get(0, 0), 5);
        assert_eq!(data.ratings.get(1, 0), 1);
        assert_eq!(data.ratings.get(1, 1), 3);
        assert_eq!(data.views[0].data().dim(), (2, 2));
        assert!(data.social.follows.is_empty());
        assert!(data.profiles[0].publication.is_zero());
    }

    #[test]
    fn synthetic_dispatch_respects_seed_override() {
        let config: AppConfig = toml::from_str("").unwrap();
        let a = load_dataset(&config, Some(5)).unwrap();
        let b = load_dataset(&config, Some(5)).unwrap();
        let c = load_dataset(&config, Some(6)).unwrap();
        assert_eq!(a.ratings.data(), b.ratings.data());
        assert_ne!(a.ratings.data(), c.ratings.data());
        assert!(a.truth.is_some());
    }
}
