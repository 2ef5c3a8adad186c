#ifndef SIL_H
#define SIL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SIL_DIRECTION_L2R 0

#define SIL_DIRECTION_R2L 1

typedef enum SilLaneAction {
  SIL_LANE_ACTION_LANE_KEEP = 0,
  SIL_LANE_ACTION_LEFT_LANE_CHANGE = 1,
  SIL_LANE_ACTION_RIGHT_LANE_CHANGE = 2,
} SilLaneAction;

typedef enum SilPhase {
  SIL_PHASE_CATCH_UP = 0,
  SIL_PHASE_FOLLOW_UP = 1,
  SIL_PHASE_BRAKE = 2,
} SilPhase;

typedef enum SilStatus {
  SIL_STATUS_OK = 0,
  SIL_STATUS_NULL_POINTER = 1,
  SIL_STATUS_INVALID_ARGUMENT = 2,
  SIL_STATUS_PARSE = 3,
  SIL_STATUS_POLICY = 4,
  SIL_STATUS_SIMULATION = 5,
  SIL_STATUS_PANIC = 6,
} SilStatus;

// Opaque policy handle.
typedef struct SilPolicy SilPolicy;

// Opaque rule set handle.
typedef struct SilRuleSet SilRuleSet;

// One surrounding sector; ignored unless `present` is nonzero.
typedef struct SilSector {
  int32_t present;
  // m
  double gap;
  // m/s
  double velocity;
} SilSector;

// Sectors in order: front, front-right, right, back-right, back, back-left, left, front-left.
typedef struct SilNumericState {
  double ego_velocity;
  int32_t ego_lane;
  struct SilSector sectors[8];
  int32_t right_valid;
  int32_t left_valid;
  // `SIL_DIRECTION_L2R` or `SIL_DIRECTION_R2L`.
  int32_t direction;
} SilNumericState;

typedef struct SilDecision {
  enum SilLaneAction lane_action;
  enum SilPhase phase;
  // m/s²
  double a_x;
  // m/s
  double v_d;
} SilDecision;

typedef struct SilSummary {
  uint64_t episodes;
  uint64_t n_lc;
  uint64_t n_hits;
  // s
  double t_avg;
  // m
  double d_avg;
  // km/h
  double v_avg;
} SilSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next `sil_*` call on this thread.
const char *sil_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sil_version(void);

// # Safety
// `s` must be null or a string returned by this library that has not been freed.
void sil_string_free(char *s);

// Creates a policy from a JSON policy config, or the built-in rules and defaults when `config_json` is null.
//
// # Safety
// `config_json` must be null or NUL-terminated; `out` must be writable.
enum SilStatus sil_policy_new(const char *config_json,
                              struct SilPolicy **out);

// Replaces the policy's rules with those in `rules`; heads not defined there keep their current rule.
//
// # Safety
// `policy` must be a live handle and `rules` a live rule set.
enum SilStatus sil_policy_set_rules(struct SilPolicy *policy,
                                    const struct SilRuleSet *rules);

// One decision for a perceived state.
//
// # Safety
// `policy` must be a live handle; `state` readable; `out` writable.
enum SilStatus sil_policy_decide(const struct SilPolicy *policy,
                                 const struct SilNumericState *state,
                                 struct SilDecision *out);

// # Safety
// `policy` must be null or a live handle; it is invalid afterwards.
void sil_policy_free(struct SilPolicy *policy);

// Parses rules written as `head:- a, not(b); c.`, one or more per text.
//
// # Safety
// `text` must be NUL-terminated; `out` writable.
enum SilStatus sil_rules_parse(const char *text, struct SilRuleSet **out);

// Canonical text of the rule set; free with `sil_string_free`.
//
// # Safety
// `rules` must be a live handle; `out` writable.
enum SilStatus sil_rules_render(const struct SilRuleSet *rules, char **out);

// Evaluates `head` against the facts named in `facts[0..n_facts]`; writes 1 if it holds, else 0.
//
// # Safety
// `rules` live; `head` NUL-terminated; `facts` points to `n_facts` NUL-terminated strings
// (may be null when `n_facts` is 0); `out` writable.
enum SilStatus sil_rules_query(const struct SilRuleSet *rules,
                               const char *head,
                               const char *const *facts,
                               size_t n_facts,
                               int32_t *out);

// # Safety
// `rules` must be null or a live handle; it is invalid afterwards.
void sil_rules_free(struct SilRuleSet *rules);

// Runs `episodes` SIL episodes in one direction and writes their summary.
// `config_json` is a run configuration (null for defaults); `seed` is the base seed.
//
// # Safety
// `config_json` must be null or NUL-terminated; `out` writable.
enum SilStatus sil_simulate(const char *config_json,
                            uint64_t seed,
                            uint32_t episodes,
                            int32_t direction_code,
                            struct SilSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIL_H */
