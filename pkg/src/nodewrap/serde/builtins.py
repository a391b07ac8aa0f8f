"""Message types every registry ships with.

Field choices mirror the usual middleware counterparts at desk scale:
Twist carries two 3-vectors, Pose matches the turtle simulator's pose,
TFMessage is a variable list of planar transforms.
"""

from .registry import SchemaRegistry

BUILTIN_SCHEMAS = """
schema Twist { linear: {x:f64, y:f64, z:f64}, angular: {x:f64, y:f64, z:f64} }
schema Pose { x:f64, y:f64, theta:f64, linear_velocity:f64, angular_velocity:f64 }
schema PoseStamped { frame:str, x:f64, y:f64, theta:f64 }
schema MoveBaseActionGoal { goal: PoseStamped }
schema Transform2D { parent:str, child:str, x:f64, y:f64, theta:f64 }
schema TFMessage { transforms: Transform2D[] }
"""


def builtin_registry() -> SchemaRegistry:
    reg = SchemaRegistry()
    reg.define_text(BUILTIN_SCHEMAS)
    return reg


def twist(linear_x=0.0, linear_y=0.0, linear_z=0.0, angular_x=0.0, angular_y=0.0, angular_z=0.0):
    return {
        "linear": {"x": float(linear_x), "y": float(linear_y), "z": float(linear_z)},
        "angular": {"x": float(angular_x), "y": float(angular_y), "z": float(angular_z)},
    }
