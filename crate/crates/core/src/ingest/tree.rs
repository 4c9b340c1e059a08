use std::fmt;

/// A single syntactic word. `index` is 1-based; `head == 0` marks the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub index: usize,
    pub form: String,
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn new(index: usize, form: impl Into<String>, head: usize, deprel: impl Into<String>) -> Self {
        Token {
            index,
            form: form.into(),
            head,
            deprel: deprel.into(),
        }
    }
}

/// Structural problems that keep a token list from being a single-rooted tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeDefect {
    Empty,
    IndexGap { position: usize, index: usize },
    HeadOutOfRange { index: usize, head: usize },
    SelfLoop { index: usize },
    NoRoot,
    MultipleRoots { first: usize, second: usize },
    Cycle { index: usize },
}

impl fmt::Display for TreeDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeDefect::Empty => write!(f, "sentence has no tokens"),
            TreeDefect::IndexGap { position, index } => {
                write!(f, "token at position {position} has index {index}")
            }
            TreeDefect::HeadOutOfRange { index, head } => {
                write!(f, "token {index} has head {head} outside the sentence")
            }
            TreeDefect::SelfLoop { index } => write!(f, "token {index} is its own head"),
            TreeDefect::NoRoot => write!(f, "no token is attached to the root"),
            TreeDefect::MultipleRoots { first, second } => {
                write!(f, "tokens {first} and {second} are both attached to the root")
            }
            TreeDefect::Cycle { index } => write!(f, "token {index} lies on a head cycle"),
        }
    }
}

/// A tokenized sentence whose head links form a tree.
///
/// Construction validates the tree, so every `DepTree` in circulation has
/// exactly one root and no cycles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepTree {
    tokens: Vec<Token>,
    // Undirected neighbours, 0-based.
    adjacency: Vec<Vec<usize>>,
    sent_id: Option<String>,
}

impl DepTree {
    pub fn new(tokens: Vec<Token>) -> Result<Self, TreeDefect> {
        check_tree(&tokens)?;
        let mut adjacency = vec![Vec::new(); tokens.len()];
        for t in &tokens {
            if t.head > 0 {
                adjacency[t.index - 1].push(t.head - 1);
                adjacency[t.head - 1].push(t.index - 1);
            }
        }
        Ok(DepTree {
            tokens,
            adjacency,
            sent_id: None,
        })
    }

    /// Builds a tree from parallel form/head lists with placeholder relations.
    pub fn from_heads<S: AsRef<str>>(forms: &[S], heads: &[usize]) -> Result<Self, TreeDefect> {
        let deprels = vec!["dep"; forms.len()];
        Self::from_parts(forms, heads, &deprels)
    }

    pub fn from_parts<S: AsRef<str>, R: AsRef<str>>(
        forms: &[S],
        heads: &[usize],
        deprels: &[R],
    ) -> Result<Self, TreeDefect> {
        assert_eq!(forms.len(), heads.len(), "forms and heads differ in length");
        assert_eq!(forms.len(), deprels.len(), "forms and deprels differ in length");
        let tokens = forms
            .iter()
            .zip(heads)
            .zip(deprels)
            .enumerate()
            .map(|(i, ((f, &h), r))| Token::new(i + 1, f.as_ref(), h, r.as_ref()))
            .collect();
        Self::new(tokens)
    }

    pub fn with_sent_id(mut self, id: Option<String>) -> Self {
        self.sent_id = id;
        self
    }

    pub fn sent_id(&self) -> Option<&str> {
        self.sent_id.as_deref()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Token by 1-based index. Panics when out of range.
    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index - 1]
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    pub fn heads(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    pub fn root(&self) -> usize {
        self.tokens
            .iter()
            .find(|t| t.head == 0)
            .map(|t| t.index)
            .expect("validated tree has a root")
    }

    /// Undirected neighbours of the 1-based token `index`, as 1-based indices.
    pub fn neighbors(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[index - 1].iter().map(|&j| j + 1)
    }

    pub(crate) fn adjacency0(&self) -> &[Vec<usize>] {
        &self.adjacency
    }
}

fn check_tree(tokens: &[Token]) -> Result<(), TreeDefect> {
    let n = tokens.len();
    if n == 0 {
        return Err(TreeDefect::Empty);
    }
    let mut root = None;
    for (pos, t) in tokens.iter().enumerate() {
        if t.index != pos + 1 {
            return Err(TreeDefect::IndexGap {
                position: pos + 1,
                index: t.index,
            });
        }
        if t.head > n {
            return Err(TreeDefect::HeadOutOfRange {
                index: t.index,
                head: t.head,
            });
        }
        if t.head == t.index {
            return Err(TreeDefect::SelfLoop { index: t.index });
        }
        if t.head == 0 {
            if let Some(first) = root {
                return Err(TreeDefect::MultipleRoots {
                    first,
                    second: t.index,
                });
            }
            root = Some(t.index);
        }
    }
    if root.is_none() {
        return Err(TreeDefect::NoRoot);
    }

    // Every token must reach the root by following heads. 0 = unvisited,
    // 1 = on the current walk, 2 = known to reach the root.
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        let mut walk = Vec::new();
        let mut cur = start;
        while state[cur] == 0 {
            state[cur] = 1;
            walk.push(cur);
            cur = tokens[cur - 1].head;
        }
        if state[cur] == 1 {
            return Err(TreeDefect::Cycle { index: cur });
        }
        for w in walk {
            state[w] = 2;
        }
    }
    Ok(())
}
