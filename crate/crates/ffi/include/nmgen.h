#ifndef NMGEN_H
#define NMGEN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of a call.
 */
typedef enum NmgStatus {
  NMG_STATUS_OK = 0,
  /*
   A null pointer, bad UTF-8 or an invalid option.
   */
  NMG_STATUS_INVALID_ARGUMENT = 1,
  /*
   Unreadable or malformed input data.
   */
  NMG_STATUS_DATA_ERROR = 2,
  /*
   An internal failure, including a caught panic.
   */
  NMG_STATUS_INTERNAL = 3,
} NmgStatus;

/*
 A loaded checkpoint.
 */
typedef struct NmgModel NmgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Load a checkpoint. On success `*out` holds a handle to free with
 [`nmg_model_free`].

 # Safety
 `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum NmgStatus nmg_model_load(const char *path, struct NmgModel **out);

/*
 Release a model. Null is ignored.

 # Safety
 `model` must come from [`nmg_model_load`] and not be used afterwards.
 */
void nmg_model_free(struct NmgModel *model);

/*
 Number of actions (vocabulary plus `<end>`), or 0 for a null model.

 # Safety
 `model` must be null or a live handle.
 */
size_t nmg_model_vocab_size(const struct NmgModel *model);

/*
 Draw `n` sentences, returned newline-separated in `*out`.

 # Safety
 `model` must be a live handle and `out` a valid pointer.
 */
enum NmgStatus nmg_sample(const struct NmgModel *model,
                          size_t n,
                          uint64_t seed,
                          float temperature,
                          bool greedy,
                          char **out);

/*
 Complete a seed-tree template such as `(food () ())` `n` times.

 # Safety
 As for [`nmg_sample`]; `template` must be a nul-terminated string.
 */
enum NmgStatus nmg_complete(const struct NmgModel *model,
                            const char *template_,
                            size_t n,
                            uint64_t seed,
                            float temperature,
                            bool greedy,
                            char **out);

/*
 Corpus BLEU (0 to 100) of newline-separated hypotheses against
 references, one reference per hypothesis.

 # Safety
 String arguments must be nul-terminated and `out` a valid pointer.
 */
enum NmgStatus nmg_bleu(const char *hyps, const char *refs, size_t max_n, double *out);

/*
 Roll out `oracle` (`leftright`, `uniform`, `coaching` or `annealed`) on
 `sentence` and write the generation trace, one action per line, to
 `*out`.

 # Safety
 As for [`nmg_sample`]; string arguments must be nul-terminated.
 */
enum NmgStatus nmg_oracle_rollout(const struct NmgModel *model,
                                  const char *sentence,
                                  const char *oracle,
                                  float beta,
                                  uint64_t seed,
                                  char **out);

/*
 Release a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not be used afterwards.
 */
void nmg_string_free(char *s);

/*
 Message for the last failed call on this thread, or null. The pointer is
 valid until the next call into this library on the same thread.
 */
const char *nmg_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NMGEN_H */
