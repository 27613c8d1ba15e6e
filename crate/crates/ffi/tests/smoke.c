#include <math.h>
#include <stdio.h>
#include "medial.h"

static int fail(const char *what) {
    const char *msg = medial_last_error();
    fprintf(stderr, "%s: %s\n", what, msg ? msg : "(no message)");
    return 1;
}

int main(void) {
    MedialFields *fields = NULL;
    if (medial_fields_sphere(0.0, 0.0, 0.0, 0.4, &fields) != MEDIAL_STATUS_OK) return fail("sphere");

    double p[6] = {0.1, 0.0, 0.0, 0.0, 0.2, 0.1};
    double sdf[2], mf[2], q[2];
    if (medial_fields_eval(fields, p, 2, sdf, mf, q) != MEDIAL_STATUS_OK) return fail("eval");
    if (fabs(sdf[0] + 0.3) > 1e-12 || fabs(q[0] - 0.1) > 1e-12) return fail("values");

    MedialMesh *cover = NULL;
    if (medial_extract(fields, 0.05, 5, &cover) != MEDIAL_STATUS_OK) return fail("extract");
    if (medial_mesh_euler_characteristic(cover) != 2) return fail("euler");

    if (medial_fields_load("/nonexistent/x.scene", 0, 0, &fields) != MEDIAL_STATUS_IO) return fail("missing file");
    if (medial_last_error() == NULL) return fail("missing message");

    medial_mesh_free(cover);
    medial_fields_free(fields);
    printf("ok %s\n", medial_version());
    return 0;
}
