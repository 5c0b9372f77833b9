#ifndef NFGT_H
#define NFGT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum NfgtStatus {
  NFGT_STATUS_OK = 0,
  NFGT_STATUS_NULL_POINTER = 1,
  NFGT_STATUS_INVALID_ARGUMENT = 2,
  NFGT_STATUS_SHAPE = 3,
  NFGT_STATUS_MASKED_GAME = 4,
  NFGT_STATUS_TASK_MISMATCH = 5,
  NFGT_STATUS_IO = 6,
  NFGT_STATUS_CHECKPOINT = 7,
  NFGT_STATUS_NON_FINITE = 8,
  NFGT_STATUS_BUFFER_TOO_SMALL = 9,
  NFGT_STATUS_PANIC = 10,
} NfgtStatus;

// Output head of a model.
typedef enum NfgtTask {
  NFGT_TASK_NE = 0,
  NFGT_TASK_DEVGAIN = 1,
  NFGT_TASK_RECON = 2,
} NfgtTask;

// Opaque game handle.
typedef struct NfgtGame NfgtGame;

// Opaque model handle.
typedef struct NfgtModel NfgtModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length, 0 if none.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t nfgt_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *nfgt_version(void);

// Builds a game from `num_players` action counts and payoffs laid out
// `[player, a_1, ..., a_N]` row-major. `mask` may be null (fully observed)
// or hold one byte per joint action, nonzero meaning observed.
//
// # Safety
// Pointers must be valid for the stated lengths; `out` must be writable.
enum NfgtStatus nfgt_game_new(size_t num_players,
                              const size_t *actions,
                              const double *payoffs,
                              size_t payoffs_len,
                              const uint8_t *mask,
                              struct NfgtGame **out);

// Parses a game from its JSON document.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum NfgtStatus nfgt_game_from_json(const char *json, struct NfgtGame **out);

// Samples an equilibrium-invariant game.
//
// # Safety
// `actions` must hold `num_players` counts; `out` must be writable.
enum NfgtStatus nfgt_game_sample_invariant(uint64_t seed,
                                           size_t num_players,
                                           const size_t *actions,
                                           struct NfgtGame **out);

// Releases a game; null is ignored.
//
// # Safety
// `game` must come from this library and not be used afterwards.
void nfgt_game_free(struct NfgtGame *game);

// Number of players.
//
// # Safety
// `game` must be a live handle; `out` must be writable.
enum NfgtStatus nfgt_game_num_players(const struct NfgtGame *game, size_t *out);

// Sum of action counts over players, the length of a flattened profile.
//
// # Safety
// `game` must be a live handle; `out` must be writable.
enum NfgtStatus nfgt_game_total_actions(const struct NfgtGame *game, size_t *out);

// NE gap of a profile given as player-major marginals of length
// `nfgt_game_total_actions`.
//
// # Safety
// `probs` must hold `probs_len` values; `out` must be writable.
enum NfgtStatus nfgt_game_ne_gap(const struct NfgtGame *game,
                                 const double *probs,
                                 size_t probs_len,
                                 double *out);

// Creates a freshly initialized model.
//
// # Safety
// `out` must be writable.
enum NfgtStatus nfgt_model_new(size_t dim,
                               size_t blocks,
                               size_t action_layers,
                               size_t heads,
                               enum NfgtTask task,
                               uint64_t seed,
                               struct NfgtModel **out);

// Loads a checkpoint file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum NfgtStatus nfgt_model_load(const char *path, struct NfgtModel **out);

// Writes a checkpoint file recording `seed`.
//
// # Safety
// `model` must be a live handle; `path` a NUL-terminated string.
enum NfgtStatus nfgt_model_save(const struct NfgtModel *model, const char *path, uint64_t seed);

// Releases a model; null is ignored.
//
// # Safety
// `model` must come from this library and not be used afterwards.
void nfgt_model_free(struct NfgtModel *model);

// Number of scalar parameters.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum NfgtStatus nfgt_model_num_parameters(const struct NfgtModel *model, size_t *out);

// Task output for a raw game, preprocessed as in training: player-major
// marginals (NE), one value per joint action (devgain), or payoffs in the
// game layout (recon). `written` receives the required length even when
// `capacity` is too small.
//
// # Safety
// `out` must be valid for `capacity` values; `written` must be writable.
enum NfgtStatus nfgt_model_predict(const struct NfgtModel *model,
                                   const struct NfgtGame *game,
                                   double *out,
                                   size_t capacity,
                                   size_t *written);

// Per-action embeddings of a raw game, `[total_actions, dim]` row-major in
// player-major action order.
//
// # Safety
// `out` must be valid for `capacity` values; `written` must be writable.
enum NfgtStatus nfgt_model_encode(const struct NfgtModel *model,
                                  const struct NfgtGame *game,
                                  double *out,
                                  size_t capacity,
                                  size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NFGT_H */
