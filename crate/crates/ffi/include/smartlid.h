/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SMARTLID_H
#define SMARTLID_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SmartlidMode {
  SMARTLID_MODE_IDLE = 0,
  SMARTLID_MODE_AERATING = 1,
  SMARTLID_MODE_SENSING = 2,
  SMARTLID_MODE_FAULT = 3,
} SmartlidMode;

typedef enum SmartlidPathMode {
  SMARTLID_PATH_MODE_RASTER = 0,
  SMARTLID_PATH_MODE_SPIRAL = 1,
  SMARTLID_PATH_MODE_TARGETED = 2,
} SmartlidPathMode;

typedef enum SmartlidPhase {
  SMARTLID_PHASE_NONE = 0,
  SMARTLID_PHASE_HOMING = 1,
  SMARTLID_PHASE_PLUNGING = 2,
  SMARTLID_PHASE_MIXING = 3,
  SMARTLID_PHASE_RETRACTING = 4,
  SMARTLID_PHASE_RETURNING = 5,
} SmartlidPhase;

typedef enum SmartlidStatus {
  SMARTLID_STATUS_OK = 0,
  SMARTLID_STATUS_NULL_POINTER = 1,
  SMARTLID_STATUS_INVALID_ARGUMENT = 2,
  // Config or file could not be read or parsed.
  SMARTLID_STATUS_CONFIG = 3,
  // No answer exists for the input, e.g. Otsu on a one-value histogram.
  SMARTLID_STATUS_DEGENERATE = 4,
  // The controller refused the command (AERATE_NOW while in FAULT).
  SMARTLID_STATUS_REJECTED = 5,
  SMARTLID_STATUS_SIMULATION = 6,
  // A Rust panic was caught at the boundary.
  SMARTLID_STATUS_INTERNAL = 7,
} SmartlidStatus;

// Opaque lid configuration.
typedef struct SmartlidConfig SmartlidConfig;

// Opaque planned tool path.
typedef struct SmartlidPath SmartlidPath;

// Opaque controller running against the simulated bin.
typedef struct SmartlidRig SmartlidRig;

typedef struct SmartlidDrag {
  // N
  double per_finger_force;
  // N
  double total_force;
  // N·m
  double required_torque;
} SmartlidDrag;

typedef struct SmartlidMixReport {
  uint64_t mixed_pixels;
  uint64_t unmixed_pixels;
  double coverage_fraction;
  bool has_efficacy;
  // Meaningful only when `has_efficacy` is true.
  double efficacy_ratio;
} SmartlidMixReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or "" after a success.
// The pointer stays valid until the next smartlid call on this thread.
const char *smartlid_last_error(void);

// Library version as a static NUL-terminated string.
const char *smartlid_version(void);

// ΔA = ΔX + ΔY, ΔB = ΔX − ΔY.
enum SmartlidStatus smartlid_cartesian_to_belts(double dx, double dy, double *da, double *db);

// ΔX = (ΔA + ΔB)/2, ΔY = (ΔA − ΔB)/2.
enum SmartlidStatus smartlid_belts_to_cartesian(double da, double db, double *dx, double *dy);

enum SmartlidStatus smartlid_min_speed(double length_m, double time_budget_s, double *speed);

// Stokes drag on the configured spindle at `speed_m_s`.
enum SmartlidStatus smartlid_stokes_drag(const struct SmartlidConfig *config,
                                         double speed_m_s,
                                         struct SmartlidDrag *drag);

// Otsu threshold of a 256-bin histogram; class 0 is `<= threshold`.
enum SmartlidStatus smartlid_otsu_threshold(const uint64_t *counts, uint8_t *threshold);

// Pass `baseline_mixed = 0` when there is no manual baseline.
enum SmartlidStatus smartlid_mix_report(uint64_t mixed,
                                        uint64_t unmixed,
                                        uint64_t baseline_mixed,
                                        struct SmartlidMixReport *report);

// The shipped configuration. Never fails.
struct SmartlidConfig *smartlid_config_default(void);

// Loads and validates a TOML config file.
enum SmartlidStatus smartlid_config_load(const char *path, struct SmartlidConfig **config);

void smartlid_config_free(struct SmartlidConfig *config);

// Daily aeration time of the config, local hours and minutes.
enum SmartlidStatus smartlid_config_schedule(const struct SmartlidConfig *config,
                                             uint8_t *hour,
                                             uint8_t *minute);

// Plans one aeration pass. Targeted mode without a thermal frame falls
// back to raster.
enum SmartlidStatus smartlid_plan(const struct SmartlidConfig *config,
                                  enum SmartlidPathMode mode,
                                  struct SmartlidPath **path);

void smartlid_path_free(struct SmartlidPath *path);

enum SmartlidStatus smartlid_path_waypoint_count(const struct SmartlidPath *path, size_t *count);

// Waypoint `index` in meters.
enum SmartlidStatus smartlid_path_waypoint(const struct SmartlidPath *path,
                                           size_t index,
                                           double *x,
                                           double *y);

// Total polyline length, m, and the travel speed assigned by the planner, m/s.
enum SmartlidStatus smartlid_path_length(const struct SmartlidPath *path,
                                         double *length_m,
                                         double *speed_m_s);

// Boots a controller on a simulated bin at `start_unix_s`. `config` may be
// NULL for the shipped configuration; it is copied, not retained.
enum SmartlidStatus smartlid_rig_new(const struct SmartlidConfig *config,
                                     uint64_t seed,
                                     int64_t start_unix_s,
                                     struct SmartlidRig **rig);

void smartlid_rig_free(struct SmartlidRig *rig);

// Advances the simulation to `unix_s`, ticking the controller as often as
// it needs. Earlier times are ignored.
enum SmartlidStatus smartlid_rig_run_until(struct SmartlidRig *rig, int64_t unix_s);

// Queues AERATE_NOW. Rejected while the controller is in FAULT.
enum SmartlidStatus smartlid_rig_aerate(struct SmartlidRig *rig);

// Queues STOP: retract and return during an aeration, recovery from FAULT.
enum SmartlidStatus smartlid_rig_stop(struct SmartlidRig *rig);

// Makes the simulated end-stop switches stick open (true) or work (false).
enum SmartlidStatus smartlid_rig_set_end_stop_fault(struct SmartlidRig *rig, bool stuck);

enum SmartlidStatus smartlid_rig_state(const struct SmartlidRig *rig,
                                       enum SmartlidMode *mode,
                                       enum SmartlidPhase *phase);

// Number of aerations started since boot.
enum SmartlidStatus smartlid_rig_aeration_count(const struct SmartlidRig *rig, size_t *count);

// Copies the CSV sensor log into `buf` (NUL-terminated) when it fits.
// `needed` always receives the size including the NUL; a too-small buffer
// gives `InvalidArgument` and leaves `buf` untouched. `buf` may be NULL
// with `cap` 0 to query the size.
enum SmartlidStatus smartlid_rig_log_csv(const struct SmartlidRig *rig,
                                         char *buf,
                                         size_t cap,
                                         size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMARTLID_H */
