#ifndef MINOR_PROCESS_LAB_H
#define MINOR_PROCESS_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Matrix entry laws.
 */
typedef enum MplEntryLaw {
  MplEntryLaw_Gaussian = 0,
  MplEntryLaw_Rademacher = 1,
  MplEntryLaw_Uniform = 2,
} MplEntryLaw;

/**
 * Experiment regimes, mirroring the CLI.
 */
typedef enum MplRegime {
  MplRegime_Subcritical = 0,
  MplRegime_Critical = 1,
  MplRegime_Supercritical = 2,
  MplRegime_Identities = 3,
  MplRegime_Dbm = 4,
} MplRegime;

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum MplStatus {
  MplStatus_Ok = 0,
  MplStatus_NullPointer = 1,
  MplStatus_InvalidArgument = 2,
  MplStatus_NumericalFailure = 3,
  MplStatus_IoFailure = 4,
  MplStatus_NotFound = 5,
  MplStatus_Panic = 6,
} MplStatus;

/**
 * Opaque run artifact.
 */
typedef struct MplArtifact MplArtifact;

/**
 * Opaque experiment configuration.
 */
typedef struct MplConfig MplConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Allocate a configuration. `k` < 0 means unset (critical regime derives it
 * from `alpha`); pass a NaN `alpha` to leave it unset.
 */
struct MplConfig *mpl_config_new(enum MplRegime regime,
                                 uintptr_t n,
                                 int64_t k,
                                 double alpha,
                                 uint8_t beta,
                                 enum MplEntryLaw law,
                                 uintptr_t replicas,
                                 uint64_t seed);

void mpl_config_free(struct MplConfig *config);

/**
 * Run the configured experiment. On success `*out` owns a new artifact.
 */
enum MplStatus mpl_run(const struct MplConfig *config, struct MplArtifact **out);

void mpl_artifact_free(struct MplArtifact *artifact);

/**
 * 0 all checks passed, 1 statistical failure, 2 identity breach.
 */
int32_t mpl_artifact_exit_code(const struct MplArtifact *artifact);

uintptr_t mpl_artifact_row_count(const struct MplArtifact *artifact);

/**
 * Look up a summary scalar by name.
 */
enum MplStatus mpl_artifact_summary(const struct MplArtifact *artifact,
                                    const char *name,
                                    double *out);

/**
 * Render the artifact as the same plain-text report the CLI prints. Free
 * with `mpl_string_free`.
 */
char *mpl_artifact_render(const struct MplArtifact *artifact);

/**
 * Write the artifact as JSON to `path`.
 */
enum MplStatus mpl_artifact_write_json(const struct MplArtifact *artifact, const char *path);

void mpl_string_free(char *s);

/**
 * Tracy-Widom beta CDF at s.
 */
enum MplStatus mpl_tracy_widom_cdf(uint8_t beta, double s, double *out);

/**
 * Critical-regime joint edge intensity at rescaled coordinates (x, y).
 */
enum MplStatus mpl_fn_intensity(double alpha, double x, double y, double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MINOR_PROCESS_LAB_H */
