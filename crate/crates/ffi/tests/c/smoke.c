#include <math.h>
#include <stdio.h>
#include <string.h>

#include "tsg.h"

#define CHECK(cond)                                          \
    do {                                                     \
        if (!(cond)) {                                       \
            fprintf(stderr, "failed: %s (%s)\n", #cond,      \
                    tsg_last_error_message());               \
            return 1;                                        \
        }                                                    \
    } while (0)

int main(int argc, char **argv) {
    if (argc != 3) {
        fprintf(stderr, "usage: smoke CLOUD TASK\n");
        return 2;
    }
    CHECK(strlen(tsg_version()) > 0);

    float a[3] = {1, 0, 0}, b[3] = {1, 1, 0};
    double cos = 0;
    CHECK(tsg_cosine(a, b, 3, &cos) == TSG_STATUS_OK);
    CHECK(fabs(cos - sqrt(0.5)) < 1e-6);

    TsgCloud *cloud = NULL;
    CHECK(tsg_cloud_load("/nonexistent/cloud.mspc", &cloud) == TSG_STATUS_IO);
    CHECK(cloud == NULL);
    CHECK(strlen(tsg_last_error_message()) > 0);

    CHECK(tsg_cloud_load(argv[1], &cloud) == TSG_STATUS_OK);
    CHECK(tsg_cloud_len(cloud) > 0);

    TsgSceneGraph *g = NULL;
    CHECK(tsg_graph_build(cloud, argv[2], &g) == TSG_STATUS_OK);
    TsgGraphCounts n;
    CHECK(tsg_graph_counts(g, &n) == TSG_STATUS_OK);
    CHECK(n.place_graphs == 1 && n.place_nodes > 0 && n.regions == 0);

    double at[3] = {0, 0, 0};
    char *terrain = NULL;
    uint32_t node = 99;
    CHECK(tsg_graph_nearest_place(g, at, &terrain, &node) == TSG_STATUS_OK);
    CHECK(strcmp(terrain, "path") == 0);
    tsg_string_free(terrain);

    char *json = NULL;
    CHECK(tsg_graph_to_json(g, false, &json) == TSG_STATUS_OK);
    CHECK(strstr(json, "\"tsg/1\"") != NULL);
    tsg_string_free(json);

    CHECK(tsg_graph_counts(NULL, &n) == TSG_STATUS_BAD_ARGUMENT);
    tsg_graph_free(g);
    tsg_cloud_free(cloud);
    printf("ok %zu nodes\n", n.place_nodes);
    return 0;
}
