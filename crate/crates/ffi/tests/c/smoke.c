#include <stdio.h>
#include <string.h>
#include "nma_forge.h"

int main(void) {
    const uint32_t k[6] = {1, 0, 0, 19, 0, 1};
    NmaNetwork *net = NULL;
    if (nma_network_from_pair_counts(4, k, 6, 25, &net) != NMA_STATUS_OK) return 1;

    double h = 0.0;
    nma_network_irregularity(net, &h);
    printf("h2/k2 = %.2f\n", h);

    NmaPlanList *plans = NULL;
    if (nma_plan_enumerate(net, 10, false, &plans) != NMA_STATUS_OK) return 2;
    char *label = NULL;
    nma_plan_list_label(plans, 0, &label);
    printf("best = %s\n", label);
    nma_string_free(label);

    NmaStatus s = nma_plan_enumerate(net, 0, false, &plans);
    char *err = nma_last_error();
    printf("budget 0 -> %d (%s)\n", (int)s, err);
    nma_string_free(err);

    nma_plan_list_free(plans);
    nma_network_free(net);
    return 0;
}
