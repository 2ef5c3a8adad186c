#include <stdio.h>
#include <string.h>
#include "sil.h"

int main(void) {
    SilPolicy *policy = NULL;
    if (sil_policy_new(NULL, &policy) != SIL_STATUS_OK) return 1;

    SilNumericState s;
    memset(&s, 0, sizeof s);
    s.ego_velocity = 25.0;
    s.ego_lane = 2;
    s.right_valid = 1;
    s.left_valid = 1;
    s.direction = SIL_DIRECTION_R2L;
    s.sectors[0].present = 1;
    s.sectors[0].gap = 6.0;
    s.sectors[0].velocity = 10.0;

    SilDecision d;
    if (sil_policy_decide(policy, &s, &d) != SIL_STATUS_OK) return 2;
    if (d.phase != SIL_PHASE_BRAKE || !(d.a_x < 0.0)) return 3;

    s.direction = 42;
    if (sil_policy_decide(policy, &s, &d) != SIL_STATUS_INVALID_ARGUMENT) return 4;
    if (strlen(sil_last_error_message()) == 0) return 5;
    sil_policy_free(policy);

    SilRuleSet *rules = NULL;
    if (sil_rules_parse("lk_isDangerous:- backVel_isBigger, not(backDist_isSafe).", &rules) != SIL_STATUS_OK) return 6;
    char *text = NULL;
    if (sil_rules_render(rules, &text) != SIL_STATUS_OK) return 7;
    printf("%s %s\n", sil_version(), text);
    sil_string_free(text);
    sil_rules_free(rules);
    return 0;
}
