//! C ABI over the game type, the oracles and the model.
//!
//! Games and models are opaque heap handles released with their `_free`
//! function. Every fallible call returns an [`NfgtStatus`]; the message of the
//! last failure on the calling thread is available from
//! [`nfgt_last_error_message`]. Panics are caught at the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nfgt::game::{sample_invariant_game, Game};
use nfgt::model::{split_marginals, Model, ModelConfig, Task};
use nfgt::oracles::ne_gap;
use nfgt::training::model_input;
use nfgt::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NfgtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    MaskedGame = 4,
    TaskMismatch = 5,
    Io = 6,
    Checkpoint = 7,
    NonFinite = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Output head of a model.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NfgtTask {
    Ne = 0,
    Devgain = 1,
    Recon = 2,
}

impl From<NfgtTask> for Task {
    fn from(t: NfgtTask) -> Task {
        match t {
            NfgtTask::Ne => Task::Ne,
            NfgtTask::Devgain => Task::Devgain,
            NfgtTask::Recon => Task::Recon,
        }
    }
}

/// Opaque game handle.
pub struct NfgtGame(Game);

/// Opaque model handle.
pub struct NfgtModel(Model<f64>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> NfgtStatus {
    match e {
        Error::Shape { .. } | Error::TooLarge { .. } => NfgtStatus::Shape,
        Error::MaskedGame => NfgtStatus::MaskedGame,
        Error::TaskMismatch { .. } => NfgtStatus::TaskMismatch,
        Error::Io(_) => NfgtStatus::Io,
        Error::Checkpoint(_) => NfgtStatus::Checkpoint,
        Error::NonFinite { .. } | Error::NonFiniteLoss { .. } => NfgtStatus::NonFinite,
        _ => NfgtStatus::InvalidArgument,
    }
}

struct Failure(NfgtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(NfgtStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NfgtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NfgtStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NfgtStatus::Panic
        }
    }
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn game_ref<'a>(g: *const NfgtGame) -> Result<&'a Game, Failure> {
    g.as_ref().map(|g| &g.0).ok_or_else(|| null("game"))
}

unsafe fn model_ref<'a>(m: *const NfgtModel) -> Result<&'a Model<f64>, Failure> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null("model"))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure(NfgtStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_values(
    values: &[f64],
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> Result<(), Failure> {
    write_out(written, values.len(), "written")?;
    if values.len() > capacity {
        return Err(Failure(
            NfgtStatus::BufferTooSmall,
            format!("need {} values, capacity {capacity}", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, 0 if none.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn nfgt_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            buf.add(n).write(0);
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nfgt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a game from `num_players` action counts and payoffs laid out
/// `[player, a_1, ..., a_N]` row-major. `mask` may be null (fully observed)
/// or hold one byte per joint action, nonzero meaning observed.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfgt_game_new(
    num_players: usize,
    actions: *const usize,
    payoffs: *const f64,
    payoffs_len: usize,
    mask: *const u8,
    out: *mut *mut NfgtGame,
) -> NfgtStatus {
    guard(|| {
        let actions = slice_in(actions, num_players, "actions")?.to_vec();
        let payoffs = slice_in(payoffs, payoffs_len, "payoffs")?.to_vec();
        let mask = if mask.is_null() {
            None
        } else {
            let nj = actions
                .iter()
                .try_fold(1usize, |acc, &t| acc.checked_mul(t))
                .ok_or_else(|| Failure(NfgtStatus::Shape, "joint-action count overflows".into()))?;
            Some(
                slice_in(mask, nj, "mask")?
                    .iter()
                    .map(|&b| b != 0)
                    .collect(),
            )
        };
        let game = Game::new(actions, payoffs, mask)?;
        write_out(out, Box::into_raw(Box::new(NfgtGame(game))), "out")
    })
}

/// Parses a game from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfgt_game_from_json(
    json: *const c_char,
    out: *mut *mut NfgtGame,
) -> NfgtStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Failure(NfgtStatus::InvalidArgument, "json is not UTF-8".into()))?;
        let game = Game::from_json(text)?;
        write_out(out, Box::into_raw(Box::new(NfgtGame(game))), "out")
    })
}

/// Samples an equilibrium-invariant game.
///
/// # Safety
/// `actions` must hold `num_players` counts; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfgt_game_sample_invariant(
    seed: u64,
    num_players: usize,
    actions: *const usize,
    out: *mut *mut NfgtGame,
) -> NfgtStatus {
    guard(|| {
        let actions = slice_in(actions, num_players, "actions")?;
        let game = sample_invariant_game(seed, actions)?;
        write_out(out, Box::into_raw(Box::new(NfgtGame(game))), "out")
    })
}

/// Releases a game; null is ignored.
///
/// # Safety
/// `game` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nfgt_game_free(game: *mut NfgtGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Number of players.
///
/// # Safety
/// `game` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfgt_game_num_players(
    game: *const NfgtGame,
    out: *mut usize,
) -> NfgtStatus {
    guard(|| write_out(out, game_ref(game)?.num_players(), "out"))
}

/// Sum of action counts over players, the length of a flattened profile.
///
/// # Safety
/// `game` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfgt_game_total_actions(
    game: *const NfgtGame,
    out: *mut usize,
) -> NfgtStatus {
    guard(|| write_out(out, game_ref(game)?.total_actions(), "out"))
}

/// NE gap of a profile given as player-major marginals of length
/// `nfgt_game_total_actions`.
///
/// # Safety
/// `probs` must hold `probs_len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfgt_game_ne_gap(
    game: *const NfgtGame,
    probs: *const f64,
    probs_len: usize,
    out: *mut f64,
) -> NfgtStatus {
    guard(|| {
        let game = game_ref(game)?;
        let flat = slice_in(probs, probs_len, "probs")?;
        if flat.len() != game.total_actions() {
            return Err(Failure(
                NfgtStatus::Shape,
                format!(
                    "expected {} probabilities, got {}",
                    game.total_actions(),
                    flat.len()
                ),
            ));
        }
        let profile = split_marginals(game.actions(), flat);
        write_out(out, ne_gap(game, &profile)?.ne_gap, "out")
    })
}

/// Creates a freshly initialized model.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfgt_model_new(
    dim: usize,
    blocks: usize,
    action_layers: usize,
    heads: usize,
    task: NfgtTask,
    seed: u64,
    out: *mut *mut NfgtModel,
) -> NfgtStatus {
    guard(|| {
        let config = ModelConfig::new(dim, blocks, action_layers, heads)?;
        let model = Model::<f64>::new(config, task.into(), seed)?;
        write_out(out, Box::into_raw(Box::new(NfgtModel(model))), "out")
    })
}

/// Loads a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfgt_model_load(
    path: *const c_char,
    out: *mut *mut NfgtModel,
) -> NfgtStatus {
    guard(|| {
        let (_, model) = Model::<f64>::load(path_arg(path)?)?;
        write_out(out, Box::into_raw(Box::new(NfgtModel(model))), "out")
    })
}

/// Writes a checkpoint file recording `seed`.
///
/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nfgt_model_save(
    model: *const NfgtModel,
    path: *const c_char,
    seed: u64,
) -> NfgtStatus {
    guard(|| Ok(model_ref(model)?.save(path_arg(path)?, seed)?))
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nfgt_model_free(model: *mut NfgtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of scalar parameters.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfgt_model_num_parameters(
    model: *const NfgtModel,
    out: *mut usize,
) -> NfgtStatus {
    guard(|| write_out(out, model_ref(model)?.num_parameters(), "out"))
}

/// Task output for a raw game, preprocessed as in training: player-major
/// marginals (NE), one value per joint action (devgain), or payoffs in the
/// game layout (recon). `written` receives the required length even when
/// `capacity` is too small.
///
/// # Safety
/// `out` must be valid for `capacity` values; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfgt_model_predict(
    model: *const NfgtModel,
    game: *const NfgtGame,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> NfgtStatus {
    guard(|| {
        let model = model_ref(model)?;
        let input = model_input(model.task(), game_ref(game)?)?;
        let values = model.predict(&[&input])?.remove(0);
        write_values(&values, out, capacity, written)
    })
}

/// Per-action embeddings of a raw game, `[total_actions, dim]` row-major in
/// player-major action order.
///
/// # Safety
/// `out` must be valid for `capacity` values; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nfgt_model_encode(
    model: *const NfgtModel,
    game: *const NfgtGame,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> NfgtStatus {
    guard(|| {
        let emb = model_ref(model)?.encode(game_ref(game)?)?;
        let values: Vec<f64> = emb.rows().flatten().copied().collect();
        write_values(&values, out, capacity, written)
    })
}
