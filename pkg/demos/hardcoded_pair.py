"""Walk through the meta-MDP with the hardcoded controller and exact reducers.

Run: python3 demos/hardcoded_pair.py
"""
from crl.controller import HardcodedController
from crl.meta_mdp import render_trace, run_episode
from crl.modules_lib import ModuleConfig, init_module_set
from crl.numeric import SeededRng
from crl.problem_graph import Expression, ProblemInstance

modules = init_module_set(ModuleConfig(1, 0, hardcoded=True), 13, SeededRng(0))
controller = HardcodedController()

# Each step collapses one (operand, operator, operand) window, products first.
for text in ("1+2*3-4", "6*1*3-4+6*0*0+1-7-3+3+3*4+1+1+3+3+6+2+7"):
    trace = run_episode(controller, modules, ProblemInstance(Expression.parse(text)))
    print(render_trace(trace))
    print(f"steps={trace.n_steps} return={trace.total_return:.2f} correct={trace.correct}\n")

