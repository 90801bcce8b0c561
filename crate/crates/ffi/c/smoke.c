/* Build: cargo build -p peakmin-ffi --release
 *        cc -Icrates/ffi/include crates/ffi/c/smoke.c target/release/libpeakmin_ffi.a -lm -lpthread -ldl -o smoke
 */
#include <stdio.h>
#include "peakmin.h"

int main(void) {
    const double demand[10] = {379.5, 411, 411, 442.5, 442.5, 600, 600, 600, 600, 600};
    PmInstance *inst = NULL;
    PmSession *session = NULL;
    double pi = 0.0, x = 0.0, ratio = 0.0;

    if (pm_instance_new(630.0, 0.0, 10, 300.0, 600.0, &inst) != PM_STATUS_OK) {
        char msg[256];
        pm_last_error_message(msg, sizeof msg);
        fprintf(stderr, "%s\n", msg);
        return 1;
    }
    pm_optimal_cr(inst, &pi);
    printf("pi_star %.4f\n", pi);

    pm_session_new(inst, PM_MODE_ANYTIME, 0.0, 0.0, 0.0, &session);
    for (int t = 0; t < 10; t++) {
        PmStatus s = pm_session_step(session, demand[t], &x, &ratio);
        if (s != PM_STATUS_OK) {
            fprintf(stderr, "step %d: %s\n", t + 1, pm_status_name(s));
            return 1;
        }
        printf("%d %.2f %.4f\n", t + 1, x, ratio);
    }
    pm_session_free(session);
    pm_instance_free(inst);
    return 0;
}
