#ifndef IDEVAL_H
#define IDEVAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum IdevalStatus {
  IDEVAL_STATUS_OK = 0,
  // A required pointer was null or a string was not UTF-8.
  IDEVAL_STATUS_INVALID_ARGUMENT = 1,
  // Inputs failed validation (missing weights, bad clusterings, ...).
  IDEVAL_STATUS_VALIDATION = 2,
  // An input file or string could not be parsed.
  IDEVAL_STATUS_PARSE = 3,
  // A file could not be read.
  IDEVAL_STATUS_IO = 4,
  // The requested value does not exist, e.g. quality without an ideal.
  IDEVAL_STATUS_NOT_AVAILABLE = 5,
  // A worked example did not reproduce.
  IDEVAL_STATUS_MISMATCH = 6,
  // A bug: the library panicked.
  IDEVAL_STATUS_INTERNAL = 7,
} IdevalStatus;

// Assignment mode of the two schemes being compared.
typedef enum IdevalMode {
  // Both schemes label the same clustering.
  IDEVAL_MODE_SEPARATE = 0,
  // Memberships may differ as well.
  IDEVAL_MODE_SIMULTANEOUS = 1,
} IdevalMode;

// An evaluated metrics report.
typedef struct IdevalReport IdevalReport;

typedef struct IdevalImpact {
  double jaccard_distance;
  double split_rate;
  double merge_rate;
} IdevalImpact;

typedef struct IdevalQuality {
  double good_split_rate;
  double bad_split_rate;
  double good_merge_rate;
  double bad_merge_rate;
  double delta_precision;
  double delta_recall;
  double iq;
} IdevalQuality;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null. Valid until
// the next call into the library from the same thread.
const char *ideval_last_error(void);

// Library version as a static string.
const char *ideval_version(void);

// Evaluates the run described by a JSON configuration file.
//
// # Safety
// `config_path` is a valid NUL-terminated string; `out` is a valid pointer.
enum IdevalStatus ideval_evaluate_config(const char *config_path, struct IdevalReport **out);

// Evaluates in-memory clustering files.
//
// `hist_tsv`, `base_tsv` and `exp_tsv` hold `item<TAB>cluster_id[<TAB>weight]`
// lines; `hist_tsv` may be null for no history. `ideal_tsv` holds
// `element<TAB>class` lines and may be null. A non-positive `k` selects the
// default synthetic-id weight.
//
// # Safety
// Non-null strings are valid and NUL-terminated; `out` is a valid pointer.
enum IdevalStatus ideval_evaluate_tsv(const char *hist_tsv,
                                      const char *hist_epoch,
                                      const char *base_tsv,
                                      const char *exp_tsv,
                                      const char *ideal_tsv,
                                      enum IdevalMode mode,
                                      double k,
                                      struct IdevalReport **out);

// Copies the impact metrics (fractions) into `out`.
//
// # Safety
// `report` is a live handle; `out` is a valid pointer.
enum IdevalStatus ideval_report_impact(const struct IdevalReport *report, struct IdevalImpact *out);

// Copies the quality metrics into `out`; `NotAvailable` when the run had
// no ideal clustering.
//
// # Safety
// `report` is a live handle; `out` is a valid pointer.
enum IdevalStatus ideval_report_quality(const struct IdevalReport *report,
                                        struct IdevalQuality *out);

// The report as pretty-printed JSON. The string is owned by the report and
// lives until [`ideval_report_free`].
//
// # Safety
// `report` is a live handle; `out` is a valid pointer.
enum IdevalStatus ideval_report_json(struct IdevalReport *report, const char **out);

// Releases a report. Null is ignored.
//
// # Safety
// `report` is null or a handle not yet freed.
void ideval_report_free(struct IdevalReport *report);

// Recomputes the embedded worked examples. Writes how many figures
// reproduced and how many exist; returns `Mismatch` unless all do.
//
// # Safety
// Non-null out-pointers are valid.
enum IdevalStatus ideval_check_figures(uint32_t *passed, uint32_t *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IDEVAL_H */
