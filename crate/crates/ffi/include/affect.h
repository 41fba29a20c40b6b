#ifndef AFFECT_H
#define AFFECT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 The nine arousal/valence states, low arousal first, negative valence
 first within each arousal level.
 */
typedef enum AffectState {
  AFFECT_STATE_LANV = 0,
  AFFECT_STATE_LAUV = 1,
  AFFECT_STATE_LAPV = 2,
  AFFECT_STATE_MANV = 3,
  AFFECT_STATE_MAUV = 4,
  AFFECT_STATE_MAPV = 5,
  AFFECT_STATE_HANV = 6,
  AFFECT_STATE_HAUV = 7,
  AFFECT_STATE_HAPV = 8,
} AffectState;

/*
 Result code of every fallible call.
 */
typedef enum AffectStatus {
  AFFECT_STATUS_OK = 0,
  AFFECT_STATUS_NULL_POINTER = 1,
  AFFECT_STATUS_INVALID_ARGUMENT = 2,
  AFFECT_STATUS_IO = 3,
  AFFECT_STATUS_PARSE = 4,
  AFFECT_STATUS_INSUFFICIENT_DATA = 5,
  AFFECT_STATUS_NUMERIC = 6,
  AFFECT_STATUS_PIPELINE = 7,
  AFFECT_STATUS_PANIC = 8,
} AffectStatus;

/*
 Opaque fitted affective curve.
 */
typedef struct AffectCurve AffectCurve;

/*
 Opaque block-matching flow field.
 */
typedef struct AffectFlowField AffectFlowField;

typedef struct AffectDecomposition {
  double d1;
  double d2;
  double h1;
  double h2;
} AffectDecomposition;

typedef struct AffectParams {
  double lambda1;
  double lambda2;
  double lambda3;
  double alpha1;
  double nu1;
  double smoothing_window_s;
} AffectParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *affect_version(void);

/*
 Message of the last failed call on this thread, or NULL if the last call
 succeeded. The pointer stays valid until the next call on this thread.
 */
const char *affect_last_error_message(void);

/*
 Short static description of a status code.
 */
const char *affect_status_name(enum AffectStatus status);

/*
 Estimates block-matching flow from `frame_a` to `frame_b`, both 8-bit
 grayscale, row-major, `width * height` bytes. Zero for `block_size`,
 `search_radius` or `levels` selects the library default.
 */
enum AffectStatus affect_flow_estimate(const uint8_t *frame_a,
                                       const uint8_t *frame_b,
                                       uintptr_t width,
                                       uintptr_t height,
                                       uintptr_t block_size,
                                       uintptr_t search_radius,
                                       uintptr_t levels,
                                       struct AffectFlowField **out_field);

/*
 Block-grid dimensions of a flow field.
 */
enum AffectStatus affect_flow_dims(const struct AffectFlowField *field,
                                   uintptr_t *out_cols,
                                   uintptr_t *out_rows);

/*
 Copies the flow vectors as interleaved `(dx, dy)` pairs, row-major over
 the block grid. `capacity` counts doubles and must be at least
 `2 * cols * rows`.
 */
enum AffectStatus affect_flow_vectors(const struct AffectFlowField *field,
                                      double *out_xy,
                                      uintptr_t capacity);

/*
 Mean flow magnitude normalized by `v_max` and clamped to [0,1].
 */
enum AffectStatus affect_flow_activity(const struct AffectFlowField *field,
                                       double v_max,
                                       double *out_activity);

/*
 Releases a flow field. NULL is ignored.
 */
void affect_flow_free(struct AffectFlowField *field);

/*
 Gated motion component `m = m_bar * (1 - g)`.
 */
enum AffectStatus affect_motion_component(double m_bar, double gate, double *out_m);

/*
 Splits the 2x2 affine matrix `chi` (row-major `[c1, c3, c2, c4]`) into
 divergence, curl and the two deformation terms.
 */
enum AffectStatus affect_decompose(const double *chi, struct AffectDecomposition *out_d);

/*
 Default model parameters.
 */
struct AffectParams affect_params_default(void);

/*
 Contentment component at `t_elapsed` seconds into a situation.
 */
enum AffectStatus affect_contentment(double t_elapsed,
                                     const struct AffectParams *params,
                                     double *out_l);

/*
 Fits the arousal-over-valence curve through `n` points. `noise_variance`
 and `length_scale` fall back to the library defaults when `<= 0`.
 */
enum AffectStatus affect_curve_fit(const double *valence,
                                   const double *arousal,
                                   uintptr_t n,
                                   double noise_variance,
                                   double length_scale,
                                   struct AffectCurve **out_curve);

/*
 Posterior mean and variance of arousal at valence `v`. Either output may
 be NULL.
 */
enum AffectStatus affect_curve_predict(const struct AffectCurve *curve,
                                       double v,
                                       double *out_mean,
                                       double *out_variance);

/*
 Length scale the curve was fitted with; 0 for a degenerate curve fitted
 to a single distinct valence.
 */
enum AffectStatus affect_curve_length_scale(const struct AffectCurve *curve, double *out_ell);

/*
 Releases a curve. NULL is ignored.
 */
void affect_curve_free(struct AffectCurve *curve);

/*
 Maps valence in [-1,1] and arousal in [0,1] onto the 0..6 rating scale.
 */
enum AffectStatus affect_to_sam_scale(double valence,
                                      double arousal,
                                      double *out_v6,
                                      double *out_a6);

/*
 Bins a rating-scale pair into one of nine states with the default
 thresholds.
 */
enum AffectStatus affect_bin_state(double v6, double a6, enum AffectState *out_state);

/*
 Four-letter code of a state, e.g. "HAPV".
 */
const char *affect_state_code(enum AffectState state);

enum AffectStatus affect_rmse(const double *pred,
                              const double *truth,
                              uintptr_t n,
                              double *out_rmse);

enum AffectStatus affect_pearson(const double *x, const double *y, uintptr_t n, double *out_r);

enum AffectStatus affect_spearman(const double *x, const double *y, uintptr_t n, double *out_rho);

/*
 Zero-phase Butterworth high-pass of `n` samples into `out_y` (may alias
 `x`). `order` must be even.
 */
enum AffectStatus affect_highpass(const double *x,
                                  uintptr_t n,
                                  double sample_rate,
                                  double cutoff_hz,
                                  uintptr_t order,
                                  double *out_y);

/*
 Runs the labeling pipeline for the JSON config at `config_path`, writing
 artifacts under `out_dir`. Per-situation failures do not abort the run;
 they are counted in `out_failures` (may be NULL) and reported as
 `AFFECT_STATUS_PIPELINE`.
 */
enum AffectStatus affect_run_pipeline(const char *config_path,
                                      const char *out_dir,
                                      uintptr_t workers,
                                      uintptr_t *out_failures);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AFFECT_H */
